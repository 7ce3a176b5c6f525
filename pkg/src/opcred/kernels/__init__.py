"""Hot loops of the capital simulation.

The compiled extension is used when it was built; otherwise, or when
``OPCRED_PURE_PYTHON`` is set, the numpy implementation is selected.
``BACKEND`` names the active one.
"""

import os

from . import _pykernels

if os.environ.get("OPCRED_PURE_PYTHON"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15

# chunked inversion keeps exp(-rate) far from underflow
MAX_CHUNK_RATE = 256.0


def mix64(z: int) -> int:
    """SplitMix64 finalizer on Python ints."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, *labels: int) -> int:
    """Key of an independent counter stream derived from ``seed`` and integer labels."""
    key = mix64((seed & MASK64) + _GAMMA)
    for label in labels:
        key = mix64(key ^ mix64((int(label) + 1) * _GAMMA & MASK64))
    return key


def chunking(rate: float) -> tuple[int, float]:
    """Split a Poisson rate into equal chunks no larger than ``MAX_CHUNK_RATE``."""
    if rate <= 0:
        return 1, 0.0
    chunks = max(1, -int(-rate // MAX_CHUNK_RATE))
    return chunks, rate / chunks


def implementation(name: str | None = None):
    """Kernel module by name (``"cython"``/``"python"``), default the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


pareto_compound = _impl.pareto_compound
compound_counts = _impl.compound_counts
severity_uniforms = _impl.severity_uniforms
segment_sums = _impl.segment_sums
