"""Expert-guided Bayesian optimization (C++ core)."""

import json

from . import _core
from ._core import (
    Engine,
    GPosterior,
    KernelConfig,
    benchmark_eval,
    benchmark_info,
    benchmark_names,
    beta1,
    beta_f,
    derive_seed,
    g_interval,
    gram_matrix,
    kernel_eval,
    log_likelihood,
    sigmoid,
    solve_mle,
)


def _cfg(config):
    if config is None:
        return ""
    return config if isinstance(config, str) else json.dumps(config)


def default_config():
    return json.loads(_core.default_config())


def config_problems(config):
    return list(_core.config_problems(_cfg(config)))


def parse_record(text):
    """JSONL text of one record -> (header dict, list of step dicts)."""
    lines = [json.loads(l) for l in text.splitlines() if l.strip()]
    return lines[0], lines[1:]


def run_single(benchmark, method, accuracy, seed, horizon, config=None):
    return _core.run_single(benchmark, method, accuracy, seed, horizon, _cfg(config))


def optimize(objective, expert, lower, upper, method="cobol", horizon=20, seed=0, config=None):
    """Returns the run record as JSONL text; see parse_record."""
    return _core.optimize(objective, expert, list(map(float, lower)), list(map(float, upper)),
                          method, horizon, seed, _cfg(config))


def make_engine(method, lower, upper, horizon=20, seed=0, config=None):
    return Engine(method, list(map(float, lower)), list(map(float, upper)), _cfg(config), horizon, seed)


def compute_metrics(record_jsonl):
    return _core.compute_metrics(record_jsonl)


def same_trace(a, b):
    return _core.same_trace(a, b)
