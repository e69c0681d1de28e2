"""Exception hierarchy.

Every error raised on purpose by this package derives from
:class:`RowCovError`; the CLI maps these to exit code 2 and a JSON error
object whose ``error`` field is the class's ``kind``.
"""


class RowCovError(ValueError):
    kind = "error"


class InvalidInputError(RowCovError):
    kind = "invalid_input"


class InvalidDesignError(RowCovError):
    kind = "invalid_design"


class DimensionError(RowCovError):
    kind = "dimension_mismatch"


class InvalidCovarianceError(RowCovError):
    kind = "invalid_covariance"


class RankError(RowCovError):
    kind = "rank_deficient"


class TrivialityError(RowCovError):
    """Raised when every invariant statistic is almost surely constant.

    This happens when the residual dimension ``n_eff`` does not exceed the
    number of (reduced) columns ``p_eff``: the residual column space then
    fills the whole residual row space and no invariant test can have power
    above its level.
    """

    kind = "trivial_regime"


class ConfoundedDirectionError(RowCovError):
    """Raised when a spike direction lies in the column space of the design.

    Such a direction is absorbed by the mean model; covariance along it
    cannot be detected by any invariant test.
    """

    kind = "confounded_direction"


class InfiniteMLEError(RowCovError):
    kind = "infinite_mle"
