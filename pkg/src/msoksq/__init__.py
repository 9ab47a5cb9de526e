"""Online kernel classification at a fusion center with learned stochastic sensor quantizers."""

from ._backend import NAME as BACKEND
from .data import (
    ObservationAlphabet,
    QuantizationAlphabet,
    Sample,
    SampleStream,
    StreamConfig,
    build_alphabets,
    build_quantization_points,
    generate_synthetic_alphabet,
    load_iris,
    make_stream,
    stream_next,
)
from .errors import ConfigurationError, DataError
from .expansion import EtaSchedule, Expansion, step_update
from .kernels import (
    marginalized_count_kernel,
    marginalized_kernel_bruteforce,
    marginalized_linear_kernel,
    weighted_count_kernel,
    weighted_linear_kernel,
)
from .loss import Logistic, SoftMargin, loss, loss_subgradient, make_loss
from .quantizer import RuleTable, determinization_gap, init_rules, sample_output, update_rule
from .selection import WeightVector, enabled_sensors, lambda2_schedule, update_weights
from .trainer import Learner, RiskTrace, TrainerConfig, acr_binary, acr_multiclass, run

__version__ = "0.1.0"
