"""Gate-level CSM transient simulation with neural current surrogates and a CPU/GPU cost model."""

__version__ = "0.1.0"
