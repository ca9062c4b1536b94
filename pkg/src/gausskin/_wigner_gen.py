"""Wigner blocks of orders 2 and 3 as straight-line code.

Generated from the term tables in ``shrot`` by
``shrot.write_generated_module()``; do not edit by hand.
"""

from numba import njit


@njit(cache=True, nogil=True)
def order2(out, d1):
    out[0] = 0.0 + 0.5 * d1[8] * d1[0] + 0.5 * d1[6] * d1[2] + 0.5 * d1[2] * d1[6] + 0.5 * d1[0] * d1[8]
    out[1] = 0.0 + 1.0 * d1[7] * d1[0] + 1.0 * d1[1] * d1[6]
    out[2] = 0.0 + 0.8660254037844386 * d1[7] * d1[1] + 0.8660254037844386 * d1[1] * d1[7]
    out[3] = 0.0 + 1.0 * d1[7] * d1[2] + 1.0 * d1[1] * d1[8]
    out[4] = 0.0 + 0.5 * d1[8] * d1[2] + -0.5 * d1[6] * d1[0] + 0.5 * d1[2] * d1[8] + -0.5 * d1[0] * d1[6]
    out[5] = 0.0 + 0.5 * d1[5] * d1[0] + 0.5 * d1[3] * d1[2] + 0.5000000000000001 * d1[2] * d1[3] + 0.5000000000000001 * d1[0] * d1[5]
    out[6] = 0.0 + 1.0 * d1[4] * d1[0] + 1.0000000000000002 * d1[1] * d1[3]
    out[7] = 0.0 + 0.8660254037844386 * d1[4] * d1[1] + 0.8660254037844386 * d1[1] * d1[4]
    out[8] = 0.0 + 1.0 * d1[4] * d1[2] + 1.0000000000000002 * d1[1] * d1[5]
    out[9] = 0.0 + 0.5 * d1[5] * d1[2] + -0.5 * d1[3] * d1[0] + 0.5000000000000001 * d1[2] * d1[5] + -0.5000000000000001 * d1[0] * d1[3]
    out[10] = 0.0 + 0.5773502691896257 * d1[5] * d1[3] + 0.5773502691896257 * d1[3] * d1[5] + -0.28867513459481287 * d1[8] * d1[6] + -0.28867513459481287 * d1[6] * d1[8] + -0.28867513459481287 * d1[2] * d1[0] + -0.28867513459481287 * d1[0] * d1[2]
    out[11] = 0.0 + 1.1547005383792515 * d1[4] * d1[3] + -0.5773502691896257 * d1[7] * d1[6] + -0.5773502691896257 * d1[1] * d1[0]
    out[12] = 0.0 + 1.0 * d1[4] * d1[4] + -0.5 * d1[7] * d1[7] + -0.5 * d1[1] * d1[1]
    out[13] = 0.0 + 1.1547005383792515 * d1[4] * d1[5] + -0.5773502691896257 * d1[7] * d1[8] + -0.5773502691896257 * d1[1] * d1[2]
    out[14] = 0.0 + 0.5773502691896257 * d1[5] * d1[5] + -0.5773502691896257 * d1[3] * d1[3] + -0.28867513459481287 * d1[8] * d1[8] + 0.28867513459481287 * d1[6] * d1[6] + -0.28867513459481287 * d1[2] * d1[2] + 0.28867513459481287 * d1[0] * d1[0]
    out[15] = 0.0 + 0.5 * d1[5] * d1[6] + 0.5 * d1[3] * d1[8] + 0.5000000000000001 * d1[8] * d1[3] + 0.5000000000000001 * d1[6] * d1[5]
    out[16] = 0.0 + 1.0 * d1[4] * d1[6] + 1.0000000000000002 * d1[7] * d1[3]
    out[17] = 0.0 + 0.8660254037844386 * d1[4] * d1[7] + 0.8660254037844386 * d1[7] * d1[4]
    out[18] = 0.0 + 1.0 * d1[4] * d1[8] + 1.0000000000000002 * d1[7] * d1[5]
    out[19] = 0.0 + 0.5 * d1[5] * d1[8] + -0.5 * d1[3] * d1[6] + 0.5000000000000001 * d1[8] * d1[5] + -0.5000000000000001 * d1[6] * d1[3]
    out[20] = 0.0 + 0.5 * d1[8] * d1[6] + 0.5 * d1[6] * d1[8] + -0.5 * d1[2] * d1[0] + -0.5 * d1[0] * d1[2]
    out[21] = 0.0 + 1.0 * d1[7] * d1[6] + -1.0 * d1[1] * d1[0]
    out[22] = 0.0 + 0.8660254037844386 * d1[7] * d1[7] + -0.8660254037844386 * d1[1] * d1[1]
    out[23] = 0.0 + 1.0 * d1[7] * d1[8] + -1.0 * d1[1] * d1[2]
    out[24] = 0.0 + 0.5 * d1[8] * d1[8] + -0.5 * d1[6] * d1[6] + -0.5 * d1[2] * d1[2] + 0.5 * d1[0] * d1[0]

@njit(cache=True, nogil=True)
def order3(out, d1, d2):
    out[0] = 0.0 + 0.5 * d1[8] * d2[0] + 0.5 * d1[6] * d2[4] + 0.5 * d1[2] * d2[20] + 0.5 * d1[0] * d2[24]
    out[1] = 0.0 + 1.224744871391589 * d1[7] * d2[0] + 1.224744871391589 * d1[1] * d2[20]
    out[2] = 0.0 + 0.9682458365518543 * d1[7] * d2[1] + 0.9682458365518543 * d1[1] * d2[21]
    out[3] = 0.0 + 0.9128709291752769 * d1[7] * d2[2] + 0.9128709291752769 * d1[1] * d2[22]
    out[4] = 0.0 + 0.9682458365518543 * d1[7] * d2[3] + 0.9682458365518543 * d1[1] * d2[23]
    out[5] = 0.0 + 1.224744871391589 * d1[7] * d2[4] + 1.224744871391589 * d1[1] * d2[24]
    out[6] = 0.0 + 0.5 * d1[8] * d2[4] + -0.5 * d1[6] * d2[0] + 0.5 * d1[2] * d2[24] + -0.5 * d1[0] * d2[20]
    out[7] = 0.0 + 0.408248290463863 * d1[5] * d2[0] + 0.408248290463863 * d1[3] * d2[4] + 0.408248290463863 * d1[8] * d2[5] + 0.408248290463863 * d1[6] * d2[9] + 0.408248290463863 * d1[2] * d2[15] + 0.408248290463863 * d1[0] * d2[19]
    out[8] = 0.0 + 1.0 * d1[4] * d2[0] + 1.0 * d1[7] * d2[5] + 1.0 * d1[1] * d2[15]
    out[9] = 0.0 + 0.7905694150420949 * d1[4] * d2[1] + 0.7905694150420949 * d1[7] * d2[6] + 0.7905694150420949 * d1[1] * d2[16]
    out[10] = 0.0 + 0.7453559924999299 * d1[4] * d2[2] + 0.7453559924999299 * d1[7] * d2[7] + 0.7453559924999299 * d1[1] * d2[17]
    out[11] = 0.0 + 0.7905694150420949 * d1[4] * d2[3] + 0.7905694150420949 * d1[7] * d2[8] + 0.7905694150420949 * d1[1] * d2[18]
    out[12] = 0.0 + 1.0 * d1[4] * d2[4] + 1.0 * d1[7] * d2[9] + 1.0 * d1[1] * d2[19]
    out[13] = 0.0 + 0.408248290463863 * d1[5] * d2[4] + -0.408248290463863 * d1[3] * d2[0] + 0.408248290463863 * d1[8] * d2[9] + -0.408248290463863 * d1[6] * d2[5] + 0.408248290463863 * d1[2] * d2[19] + -0.408248290463863 * d1[0] * d2[15]
    out[14] = 0.0 + 0.5163977794943222 * d1[5] * d2[5] + 0.5163977794943222 * d1[3] * d2[9] + 0.447213595499958 * d1[2] * d2[10] + 0.447213595499958 * d1[0] * d2[14] + -0.12909944487358055 * d1[8] * d2[0] + -0.12909944487358055 * d1[6] * d2[4] + 0.12909944487358055 * d1[2] * d2[20] + 0.12909944487358055 * d1[0] * d2[24]
    out[15] = 0.0 + 1.2649110640673518 * d1[4] * d2[5] + 1.0954451150103324 * d1[1] * d2[10] + -0.31622776601683794 * d1[7] * d2[0] + 0.31622776601683794 * d1[1] * d2[20]
    out[16] = 0.0 + 1.0 * d1[4] * d2[6] + 0.8660254037844386 * d1[1] * d2[11] + -0.25 * d1[7] * d2[1] + 0.25 * d1[1] * d2[21]
    out[17] = 0.0 + 0.9428090415820634 * d1[4] * d2[7] + 0.816496580927726 * d1[1] * d2[12] + -0.23570226039551584 * d1[7] * d2[2] + 0.23570226039551584 * d1[1] * d2[22]
    out[18] = 0.0 + 1.0 * d1[4] * d2[8] + 0.8660254037844386 * d1[1] * d2[13] + -0.25 * d1[7] * d2[3] + 0.25 * d1[1] * d2[23]
    out[19] = 0.0 + 1.2649110640673518 * d1[4] * d2[9] + 1.0954451150103324 * d1[1] * d2[14] + -0.31622776601683794 * d1[7] * d2[4] + 0.31622776601683794 * d1[1] * d2[24]
    out[20] = 0.0 + 0.5163977794943222 * d1[5] * d2[9] + -0.5163977794943222 * d1[3] * d2[5] + 0.447213595499958 * d1[2] * d2[14] + -0.447213595499958 * d1[0] * d2[10] + -0.12909944487358055 * d1[8] * d2[4] + 0.12909944487358055 * d1[6] * d2[0] + 0.12909944487358055 * d1[2] * d2[24] + -0.12909944487358055 * d1[0] * d2[20]
    out[21] = 0.0 + 0.5477225575051661 * d1[5] * d2[10] + 0.5477225575051661 * d1[3] * d2[14] + -0.31622776601683794 * d1[8] * d2[15] + -0.31622776601683794 * d1[6] * d2[19] + -0.31622776601683794 * d1[2] * d2[5] + -0.31622776601683794 * d1[0] * d2[9]
    out[22] = 0.0 + 1.3416407864998738 * d1[4] * d2[10] + -0.7745966692414834 * d1[7] * d2[15] + -0.7745966692414834 * d1[1] * d2[5]
    out[23] = 0.0 + 1.0606601717798212 * d1[4] * d2[11] + -0.6123724356957945 * d1[7] * d2[16] + -0.6123724356957945 * d1[1] * d2[6]
    out[24] = 0.0 + 1.0 * d1[4] * d2[12] + -0.5773502691896257 * d1[7] * d2[17] + -0.5773502691896257 * d1[1] * d2[7]
    out[25] = 0.0 + 1.0606601717798212 * d1[4] * d2[13] + -0.6123724356957945 * d1[7] * d2[18] + -0.6123724356957945 * d1[1] * d2[8]
    out[26] = 0.0 + 1.3416407864998738 * d1[4] * d2[14] + -0.7745966692414834 * d1[7] * d2[19] + -0.7745966692414834 * d1[1] * d2[9]
    out[27] = 0.0 + 0.5477225575051661 * d1[5] * d2[14] + -0.5477225575051661 * d1[3] * d2[10] + -0.31622776601683794 * d1[8] * d2[19] + 0.31622776601683794 * d1[6] * d2[15] + -0.31622776601683794 * d1[2] * d2[9] + 0.31622776601683794 * d1[0] * d2[5]
    out[28] = 0.0 + 0.5163977794943222 * d1[5] * d2[15] + 0.5163977794943222 * d1[3] * d2[19] + 0.447213595499958 * d1[8] * d2[10] + 0.447213595499958 * d1[6] * d2[14] + -0.12909944487358055 * d1[8] * d2[20] + -0.12909944487358055 * d1[6] * d2[24] + -0.12909944487358055 * d1[2] * d2[0] + -0.12909944487358055 * d1[0] * d2[4]
    out[29] = 0.0 + 1.2649110640673518 * d1[4] * d2[15] + 1.0954451150103324 * d1[7] * d2[10] + -0.31622776601683794 * d1[7] * d2[20] + -0.31622776601683794 * d1[1] * d2[0]
    out[30] = 0.0 + 1.0 * d1[4] * d2[16] + 0.8660254037844386 * d1[7] * d2[11] + -0.25 * d1[7] * d2[21] + -0.25 * d1[1] * d2[1]
    out[31] = 0.0 + 0.9428090415820634 * d1[4] * d2[17] + 0.816496580927726 * d1[7] * d2[12] + -0.23570226039551584 * d1[7] * d2[22] + -0.23570226039551584 * d1[1] * d2[2]
    out[32] = 0.0 + 1.0 * d1[4] * d2[18] + 0.8660254037844386 * d1[7] * d2[13] + -0.25 * d1[7] * d2[23] + -0.25 * d1[1] * d2[3]
    out[33] = 0.0 + 1.2649110640673518 * d1[4] * d2[19] + 1.0954451150103324 * d1[7] * d2[14] + -0.31622776601683794 * d1[7] * d2[24] + -0.31622776601683794 * d1[1] * d2[4]
    out[34] = 0.0 + 0.5163977794943222 * d1[5] * d2[19] + -0.5163977794943222 * d1[3] * d2[15] + 0.447213595499958 * d1[8] * d2[14] + -0.447213595499958 * d1[6] * d2[10] + -0.12909944487358055 * d1[8] * d2[24] + 0.12909944487358055 * d1[6] * d2[20] + -0.12909944487358055 * d1[2] * d2[4] + 0.12909944487358055 * d1[0] * d2[0]
    out[35] = 0.0 + 0.408248290463863 * d1[5] * d2[20] + 0.408248290463863 * d1[3] * d2[24] + 0.408248290463863 * d1[8] * d2[15] + 0.408248290463863 * d1[6] * d2[19] + -0.408248290463863 * d1[2] * d2[5] + -0.408248290463863 * d1[0] * d2[9]
    out[36] = 0.0 + 1.0 * d1[4] * d2[20] + 1.0 * d1[7] * d2[15] + -1.0 * d1[1] * d2[5]
    out[37] = 0.0 + 0.7905694150420949 * d1[4] * d2[21] + 0.7905694150420949 * d1[7] * d2[16] + -0.7905694150420949 * d1[1] * d2[6]
    out[38] = 0.0 + 0.7453559924999299 * d1[4] * d2[22] + 0.7453559924999299 * d1[7] * d2[17] + -0.7453559924999299 * d1[1] * d2[7]
    out[39] = 0.0 + 0.7905694150420949 * d1[4] * d2[23] + 0.7905694150420949 * d1[7] * d2[18] + -0.7905694150420949 * d1[1] * d2[8]
    out[40] = 0.0 + 1.0 * d1[4] * d2[24] + 1.0 * d1[7] * d2[19] + -1.0 * d1[1] * d2[9]
    out[41] = 0.0 + 0.408248290463863 * d1[5] * d2[24] + -0.408248290463863 * d1[3] * d2[20] + 0.408248290463863 * d1[8] * d2[19] + -0.408248290463863 * d1[6] * d2[15] + -0.408248290463863 * d1[2] * d2[9] + 0.408248290463863 * d1[0] * d2[5]
    out[42] = 0.0 + 0.5 * d1[8] * d2[20] + 0.5 * d1[6] * d2[24] + -0.5 * d1[2] * d2[0] + -0.5 * d1[0] * d2[4]
    out[43] = 0.0 + 1.224744871391589 * d1[7] * d2[20] + -1.224744871391589 * d1[1] * d2[0]
    out[44] = 0.0 + 0.9682458365518543 * d1[7] * d2[21] + -0.9682458365518543 * d1[1] * d2[1]
    out[45] = 0.0 + 0.9128709291752769 * d1[7] * d2[22] + -0.9128709291752769 * d1[1] * d2[2]
    out[46] = 0.0 + 0.9682458365518543 * d1[7] * d2[23] + -0.9682458365518543 * d1[1] * d2[3]
    out[47] = 0.0 + 1.224744871391589 * d1[7] * d2[24] + -1.224744871391589 * d1[1] * d2[4]
    out[48] = 0.0 + 0.5 * d1[8] * d2[24] + -0.5 * d1[6] * d2[20] + -0.5 * d1[2] * d2[4] + 0.5 * d1[0] * d2[0]
