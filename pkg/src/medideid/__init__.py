"""Multi-format medical image de-identification: DICOM, NIfTI, twix raw data, WSI and 2D images."""

__version__ = "0.1.0"
