"""seatnet: driver-vs-passenger seat detection engine.

From-scratch CNN stack: float32 tensor kernels with reverse-mode autodiff, a
MobileNet-V2 style extractor plus a two-stage convolutional head, car-keyed
dataset splitting, SGD-momentum training with patience-based early stopping,
and thresholded evaluation. Hot kernels run in a compiled Cython core with a
pure-numpy fallback (see ``seatnet.backend``).
"""

__version__ = "0.1.0"
