"""Exception hierarchy shared across the package."""


class DFIError(Exception):
    """Base class for every error raised by this package."""


class DataError(DFIError, ValueError):
    """Invalid or unparseable input data."""


class ReportFormatError(DFIError, ValueError):
    """A report or study file could not be decoded."""


class SingularCovarianceError(DFIError, ValueError):
    """Covariance has an eigenvalue at or below the singularity floor.

    ``features`` holds the names (or indices) carrying weight in the
    offending eigenvector, i.e. the linearly dependent block.
    """

    def __init__(self, eigenvalue, eps, features=()):
        self.eigenvalue = float(eigenvalue)
        self.eps = float(eps)
        self.features = tuple(features)
        msg = (
            f"singular or near-singular covariance: eigenvalue {self.eigenvalue:.3e} "
            f"<= floor {self.eps:.3e}"
        )
        if self.features:
            msg += " (dependent features: " + ", ".join(str(f) for f in self.features) + ")"
        super().__init__(msg)
