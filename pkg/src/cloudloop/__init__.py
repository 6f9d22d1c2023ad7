"""cloudloop: desk-scale testbed for cloud-assisted remote control of an
aerial robot over an emulated network with delay and jitter."""

__version__ = "0.1.0"
