"""looptune: pairing, identification, and PI tuning for multivariable plants.

The toolkit covers the model-based design loop for decentralized PI control:

* ``linss``: linear state-space models from DAE Jacobian blocks and their
  transfer matrices,
* ``lti``: transfer-function models, closed-form step responses, fixed-step
  simulation with dead time,
* ``sysid``: step batteries, response normalization, least-squares fits,
* ``pairing``: relative gain / relative interaction analysis and loop
  pairing by the greedy or assignment rule,
* ``simc``: model reduction (zero handling and the half rule) and PI gains,
* ``cloop``: closed-loop simulation under limits without anti-windup,
* ``cli``: the ``looptune`` command tying the stages together,
* ``casestudy``: a bundled six-loop cement pyro-process data set.

The fixed-step kernels run from a compiled extension when available; set
``LOOPTUNE_BACKEND=py`` to force the pure-Python fallback (see
``looptune.kernels.BACKEND`` for the active choice).
"""

from .cloop import (LoopConfig, PiController, SaturationInterval,
                    saturation_report, simulate_closed_loop)
from .errors import (DimensionMismatch, FrequencyAtPole, ImproperSystem,
                     InvalidTauC, LoopTuneError, NeverResponds,
                     SingularAlgebraicJacobian, SingularGainMatrix,
                     UnsupportedStructure, ZeroGainModel, ZeroStep)
from .linss import DaeJacobians, StateSpaceModel, reduce_dae, transfer_at
from .lti import (TimeSeries, TransferFunction, equal_pole_dispatch,
                  step_response_analytic, step_response_numeric,
                  to_state_space)
from .pairing import (GainMatrix, LoopPair, PairingResult, analyze,
                      pair_assignment, pair_sequential, rga, ria)
from .plant import PlantMatrix, diagonal_plant
from .simc import (RECOMMENDED, FopdtModel, PiGains, ReductionReport,
                   cancel_positive_zeros, half_rule, tune_loop, tune_pi)
from .sysid import (BatteryResult, FitResult, NormalizedStep, StepExperiment,
                    fit_sopdt, initial_guess, normalize_step,
                    run_step_battery)

__version__ = "0.1.0"

__all__ = [
    "BatteryResult", "DaeJacobians", "DimensionMismatch", "FitResult",
    "FopdtModel", "FrequencyAtPole", "GainMatrix", "ImproperSystem",
    "InvalidTauC", "LoopConfig", "LoopPair", "LoopTuneError",
    "NeverResponds", "NormalizedStep", "PairingResult", "PiController",
    "PiGains", "PlantMatrix", "RECOMMENDED", "ReductionReport",
    "SaturationInterval", "SingularAlgebraicJacobian", "SingularGainMatrix",
    "StateSpaceModel", "StepExperiment", "TimeSeries", "TransferFunction",
    "UnsupportedStructure", "ZeroGainModel", "ZeroStep", "analyze",
    "cancel_positive_zeros", "diagonal_plant", "equal_pole_dispatch",
    "fit_sopdt", "half_rule", "initial_guess", "normalize_step",
    "pair_assignment", "pair_sequential", "reduce_dae", "rga", "ria",
    "run_step_battery", "saturation_report", "simulate_closed_loop",
    "step_response_analytic", "step_response_numeric", "to_state_space",
    "transfer_at", "tune_loop", "tune_pi",
]
