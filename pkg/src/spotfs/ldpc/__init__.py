"""LDPC codes: parity-check files, systematic encoding, belief propagation."""

from .alist import read_alist, write_alist
from .codec import (
    FIXTURES,
    LLR_CLIP,
    CodeSpec,
    DecodeResult,
    MotherCode,
    TannerGraph,
    code_for,
    decode,
    encode,
    load_fixture,
    qc_mother,
)
from .qc import qc_base_matrix, qc_parity_check


def write_fixtures(directory) -> None:
    """Regenerate the shipped ``.alist`` files."""
    import os

    for name, (mb, nb, Z) in FIXTURES.items():
        H = qc_parity_check(mb, nb, Z, seed=0)
        write_alist(os.path.join(directory, f"{name}.alist"), H, comment=f"QC dual-diagonal mb={mb} nb={nb} Z={Z} seed=0")


__all__ = [
    "FIXTURES",
    "LLR_CLIP",
    "CodeSpec",
    "DecodeResult",
    "MotherCode",
    "TannerGraph",
    "code_for",
    "decode",
    "encode",
    "load_fixture",
    "qc_base_matrix",
    "qc_mother",
    "qc_parity_check",
    "read_alist",
    "write_alist",
    "write_fixtures",
]
