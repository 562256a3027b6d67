"""Exception types shared across the package."""


class MomentFusionError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(MomentFusionError):
    pass


class RankDeficient(MomentFusionError):
    pass


class UnsupportedDegree(MomentFusionError):
    pass


class UnsupportedDimension(MomentFusionError):
    pass


class IllConditioned(MomentFusionError):
    pass


class DidNotConverge(MomentFusionError):
    pass


class UncertifiedRule(MomentFusionError):
    pass


class DegreeUnsupported(MomentFusionError):
    pass


class DegreeZero(MomentFusionError):
    pass


class RankMismatch(MomentFusionError):
    pass


class DimensionTooSmall(MomentFusionError):
    pass


class SpanDeficient(MomentFusionError):
    pass


class IncompleteMoments(MomentFusionError):
    pass


class UnsupportedCombination(MomentFusionError):
    pass
