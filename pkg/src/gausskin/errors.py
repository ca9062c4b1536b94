"""Exception types raised across the package."""


class GausskinError(Exception):
    """Base class for all package errors."""


class MalformedRotationError(GausskinError, ValueError):
    """A 3x3 matrix failed the orthogonality or determinant checks."""


class DegenerateWeightsError(GausskinError, ValueError):
    """A skin-weight row has no positive weight, or blends to a singular matrix."""


class IllConditionedError(GausskinError, ValueError):
    """Sample directions do not determine the SH coefficients."""


class SchemaError(GausskinError, ValueError):
    """A JSON asset violates its schema.

    ``path`` is the offending file (may be None for in-memory documents) and
    ``field`` a dotted locator of the bad field.
    """

    def __init__(self, message: str, path=None, field: str | None = None):
        self.path = path
        self.field = field
        where = []
        if path is not None:
            where.append(str(path))
        if field:
            where.append(field)
        prefix = ": ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class PlyError(GausskinError, ValueError):
    """Base class for PLY parsing failures."""


class PlyHeaderError(PlyError):
    pass


class PlyMissingPropertyError(PlyError):
    def __init__(self, name: str):
        self.property = name
        super().__init__(f"missing required vertex property {name!r}")


class PlyPropertyTypeError(PlyError):
    def __init__(self, name: str, ptype: str):
        self.property = name
        super().__init__(f"vertex property {name!r} is stored as {ptype}, expected float32")


class PlyBodyLengthError(PlyError):
    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"PLY body is {actual} bytes, header implies {expected}")


class AssetMismatchError(GausskinError, ValueError):
    """Assets that must agree (cloud, weights, rig, clip) are inconsistent."""
