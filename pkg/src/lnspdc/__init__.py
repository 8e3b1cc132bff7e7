"""Design and analysis toolkit for thin-film lithium niobate photon-pair sources."""

__version__ = "0.1.0"
