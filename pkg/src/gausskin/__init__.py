"""Complete skinning of Gaussian-splat avatars."""
