"""Exception types shared across the toolkit."""


class LoopTuneError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(LoopTuneError):
    """Matrix blocks or label lists have inconsistent shapes."""


class SingularAlgebraicJacobian(LoopTuneError):
    """The algebraic-equation Jacobian is singular.

    Usually means the model has an index problem or was linearized at a
    bad operating point.
    """


class FrequencyAtPole(LoopTuneError):
    """Transfer matrix requested at (or numerically too close to) a pole."""


class UnsupportedStructure(LoopTuneError):
    """Closed-form step response only covers one or two lags and one zero."""


class ImproperSystem(LoopTuneError):
    """More zeros than poles after cancellation; no causal realization."""


class ZeroStep(LoopTuneError):
    """The manipulated variable never moved, so normalization is undefined."""


class NeverResponds(LoopTuneError):
    """The normalized response never exceeds the detection threshold."""


class SingularGainMatrix(LoopTuneError):
    """Gain matrix is singular; relative gains are undefined."""


class ZeroGainModel(LoopTuneError):
    """PI tuning divides by the model gain, which is zero."""


class InvalidTauC(LoopTuneError):
    """Closed-loop time constant outside the admissible open interval."""
