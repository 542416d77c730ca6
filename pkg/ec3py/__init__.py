from importlib.metadata import version, PackageNotFoundError

try:
    __version__ = version(__package__)
except PackageNotFoundError:
    __version__ = "unknown"

from ec3py.sources import GaussianSource, BernoulliSource, TraceSource
from ec3py.env import ArmModel, InstanceConfig, BanditInstance, \
    AssumptionViolation, build_instance, step
from ec3py.coding import CodeScheme, code_length, encode, decode, \
    suggested_rate
from ec3py.protocol import send_bits, receive_bits, quantize_mean, \
    transmit_message, message_error_rate
from ec3py.ec3 import Ec3Player, run_ec3
from ec3py.channel import ChannelModel, capacity, error_exponent, \
    optimal_block_length
from ec3py.analysis import centralized_lower_bound, regret_upper_bound, \
    regret_trace, RegretTrace
from ec3py.config import ConfigError, ExperimentConfig, CodeConfig, \
    load_config
from ec3py.harness import run_experiment, emit_report, ingest_dataset, \
    run_anytime, sweep_rates
from ec3py.plots import RegretPlot


def test(*args, **kwargs):
    """
    Run py.test unit tests.
    """
    import pytest
    from pathlib import Path
    return pytest.main([str(Path(__file__).resolve().parent / "tests")] +
                       list(args), **kwargs)
