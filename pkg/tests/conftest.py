import pytest

from csmsim.benchmarks import load_benchmark
from csmsim.celllib import ALL_KINDS, TechnologyParams
from csmsim.engine import NoiseSpec, SimConfig, generate_noisy_inputs
from csmsim.mlp import architecture_search
from csmsim.netlist import tech_map


@pytest.fixture(scope="session")
def tech():
    return TechnologyParams()


@pytest.fixture(scope="session")
def searched(tech):
    """Architecture-search results for all three cells under default settings."""
    return {k: architecture_search(k, tech) for k in ALL_KINDS}


@pytest.fixture(scope="session")
def models(searched):
    return {k: model for k, (model, _) in searched.items()}


@pytest.fixture(scope="session")
def fa():
    return tech_map(load_benchmark("fa"))


@pytest.fixture(scope="session")
def c880():
    return tech_map(load_benchmark("c880"))


@pytest.fixture(scope="session")
def fa_suite(fa, tech):
    cfg = SimConfig()
    spec = NoiseSpec(inputs=tuple(fa.primary_inputs), v_dd=tech.v_dd, dT=cfg.dT, horizon=cfg.horizon)
    return generate_noisy_inputs(10, 7, spec)


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
