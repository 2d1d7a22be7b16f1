"""Exception types shared across the package."""


class InvalidParameter(ValueError):
    pass


class SegmentationFailure(RuntimeError):
    """Raised when a mask or image does not contain a usable eye."""


class FeatureFailure(RuntimeError):
    pass


class FitFailure(RuntimeError):
    pass


class InvalidState(RuntimeError):
    pass
