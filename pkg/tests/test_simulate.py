import dataclasses
import math

import numpy as np
import pytest
from scipy import integrate, stats

import densityjump.simulate as sim
from densityjump.bandwidth import BandwidthConfig
from densityjump.errors import DegeneratePilotError, DomainError, SimulationError
from densityjump.estim import jump_test
from densityjump.bandwidth import select_bandwidth
from densityjump.simulate import (
    Cutoff,
    SimulationSpec,
    TargetDist,
    dist_quantile,
    load_spec,
    mixture_weight,
    parse_config,
    replication_stream,
    run_estimation_study,
    run_size_power_study,
    sample_discontinuous,
    spec_from_mapping,
    true_jump,
)

GAMMA = TargetDist.gamma()
WEIBULL = TargetDist.weibull()


@pytest.mark.parametrize(
    "dist, p, expected",
    [(GAMMA, 0.3, 1.7057), (GAMMA, 0.5, 2.4248), (WEIBULL, 0.3, 1.9419), (WEIBULL, 0.5, 2.8386)],
)
def test_cutoff_quantiles(dist, p, expected):
    assert dist_quantile(dist, p) == pytest.approx(expected, abs=5e-5)


def test_weibull_median_closed_form():
    assert dist_quantile(WEIBULL, 0.5) == pytest.approx(3.5 * math.log(2.0) ** (1 / 1.75), rel=1e-14)


@pytest.mark.parametrize("dist", [GAMMA, WEIBULL, TargetDist("gamma", 0.5, 2.0)])
def test_quantile_inverts_cdf(dist):
    p = np.array([1e-6, 0.01, 0.3, 0.5, 0.9, 0.999])
    assert np.max(np.abs(dist.cdf(dist_quantile(dist, p)) - p)) <= 1e-10


def test_pdf_cdf_against_scipy():
    x = np.linspace(0.01, 12.0, 50)
    assert np.allclose(GAMMA.pdf(x), stats.gamma(2.75).pdf(x), rtol=1e-12)
    assert np.allclose(GAMMA.cdf(x), stats.gamma(2.75).cdf(x), rtol=1e-12)
    w = stats.weibull_min(1.75, scale=3.5)
    assert np.allclose(WEIBULL.pdf(x), w.pdf(x), rtol=1e-12)
    assert np.allclose(WEIBULL.cdf(x), w.cdf(x), rtol=1e-12)
    assert WEIBULL.pdf(-1.0) == 0.0


def test_dist_validation():
    with pytest.raises(DomainError):
        TargetDist("lognormal", 1.0, 1.0)
    with pytest.raises(DomainError):
        TargetDist("gamma", 0.0, 1.0)
    with pytest.raises(DomainError):
        dist_quantile(GAMMA, 1.0)


def test_cutoff_rule():
    assert Cutoff(quantile=0.3).resolve(GAMMA) == pytest.approx(1.7057, abs=5e-5)
    assert Cutoff(value=2.0).resolve(GAMMA) == 2.0
    for kwargs in ({}, {"quantile": 0.3, "value": 2.0}, {"quantile": 1.2}, {"value": -1.0}):
        with pytest.raises(DomainError):
            Cutoff(**kwargs)


def test_mixture_weight_bounds():
    c = dist_quantile(GAMMA, 0.5)
    assert mixture_weight(GAMMA, c, 0.1) == pytest.approx(0.4, abs=1e-12)
    with pytest.raises(DomainError):
        mixture_weight(GAMMA, c, 0.6)
    with pytest.raises(DomainError):
        mixture_weight(GAMMA, c, -0.6)


def test_continuous_draws_follow_the_law():
    n = 100_000
    s = sample_discontinuous(GAMMA, 1.7057, 0.0, n, replication_stream(1, 0))
    ks = stats.kstest(s.values, stats.gamma(2.75).cdf).statistic
    assert ks <= 3.0 / math.sqrt(n)


def test_jump_shifts_mass_below_cutoff():
    n = 100_000
    c = dist_quantile(GAMMA, 0.5)
    s = sample_discontinuous(GAMMA, c, 0.10, n, replication_stream(2, 0))
    frac = s.side_counts(c).n_minus / n
    assert abs(frac - 0.40) <= 3 * math.sqrt(0.4 * 0.6 / n)


def test_branch_supports():
    c = dist_quantile(WEIBULL, 0.3)
    Fc = float(WEIBULL.cdf(c))
    only_right = sample_discontinuous(WEIBULL, c, Fc, 5000, replication_stream(3, 0))
    only_left = sample_discontinuous(WEIBULL, c, Fc - 1.0, 5000, replication_stream(3, 1))
    assert np.all(only_right.values > c)
    assert np.all(only_left.values < c) and np.all(only_left.values >= 0)


def test_sampler_mean():
    N = 1_000_000
    s = sample_discontinuous(GAMMA, 1.7057, 0.0, N, replication_stream(4, 0))
    assert abs(s.values.mean() - 2.75) <= 4 * math.sqrt(2.75) / math.sqrt(N)


def test_true_jump_matches_mixture_density():
    c, d = dist_quantile(GAMMA, 0.3), 0.04
    Fc, fc = float(GAMMA.cdf(c)), float(GAMMA.pdf(c))
    g = Fc - d
    left, right = g * fc / Fc, (1 - g) * fc / (1 - Fc)
    assert true_jump(GAMMA, c, d) == pytest.approx(right - left, rel=1e-13)
    # the two pieces integrate to one
    total = integrate.quad(lambda x: g * GAMMA.pdf(x) / Fc, 0, c)[0] + integrate.quad(lambda x: (1 - g) * GAMMA.pdf(x) / (1 - Fc), c, np.inf)[0]
    assert total == pytest.approx(1.0, abs=1e-10)


def test_streams_are_reproducible_and_distinct():
    a = replication_stream(42, 7).random(5)
    assert np.array_equal(a, replication_stream(42, 7).random(5))
    assert not np.array_equal(a, replication_stream(42, 8).random(5))
    assert not np.array_equal(a, replication_stream(43, 7).random(5))


def small_spec(**kw):
    base = dict(dist=WEIBULL, cutoff=Cutoff(quantile=0.5), n=300, reps=12, seed=9)
    base.update(kw)
    return SimulationSpec(**base)


def test_spec_validation():
    with pytest.raises(DomainError):
        small_spec(n=5)
    with pytest.raises(DomainError):
        small_spec(reps=0)
    with pytest.raises(DomainError):
        small_spec(ds=(0.9,))


def test_single_replication_summary():
    spec = small_spec(reps=1)
    cell = run_estimation_study(spec)
    s = sample_discontinuous(WEIBULL, spec.c, 0.0, spec.n, replication_stream(9, 0))
    sel = select_bandwidth(s, spec.c, spec.bandwidth)
    direct = jump_test(s, spec.c, sel.b_hat_n, 0.81, "V2")
    assert cell.std_dev == 0.0
    assert cell.bias == direct.jump
    assert cell.rmse == pytest.approx(abs(direct.jump), rel=1e-15)
    assert cell.mean_b == sel.b_hat_n


def test_rmse_decomposition_and_rates():
    cell = run_estimation_study(small_spec(reps=30))
    assert cell.rmse ** 2 == pytest.approx(cell.bias ** 2 + cell.std_dev ** 2, rel=1e-12)
    assert set(cell.rejection_rates) == {0.05, 0.10}
    assert all(0.0 <= r <= 1.0 for r in cell.rejection_rates.values())
    assert cell.rejection_rates[0.05] <= cell.rejection_rates[0.10]


def test_deterministic_across_workers():
    spec = small_spec(ds=(0.0, 0.08), reps=8)
    serial = run_size_power_study(spec, threads=1)
    parallel = run_size_power_study(spec, threads=3)
    assert [dataclasses.asdict(c) for c in serial] == [dataclasses.asdict(c) for c in parallel]


def test_common_random_numbers_across_d():
    spec = small_spec(ds=(0.0, 0.08), reps=4)
    cells = run_size_power_study(spec)
    alone = run_size_power_study(spec.with_d(0.08))
    assert dataclasses.asdict(cells[1]) == dataclasses.asdict(alone[0])


def test_degenerate_replications_are_counted(monkeypatch):
    calls = {"n": 0}
    real = sim.select_bandwidth

    def flaky(*a, **k):
        calls["n"] += 1
        if calls["n"] == 1:
            raise DegeneratePilotError("synthetic")
        return real(*a, **k)

    monkeypatch.setattr(sim, "select_bandwidth", flaky)
    with pytest.raises(SimulationError):
        run_estimation_study(small_spec(reps=20))
    calls["n"] = 0
    cell = run_estimation_study(small_spec(reps=150))
    assert cell.n_excluded == 1 and cell.reps == 150


def test_config_parsing(tmp_path):
    text = """
    # weibull power cell
    dist = weibull
    c_quantile = 0.5
    n = 400
    reps = 3
    d = 0, 0.05
    delta = 0.64
    variant = v1
    seed = 17
    two_sided = yes
    """
    path = tmp_path / "cell.cfg"
    path.write_text(text)
    spec = load_spec(path)
    assert spec.dist == WEIBULL and spec.n == 400 and spec.ds == (0.0, 0.05)
    assert spec.bandwidth == BandwidthConfig(delta=0.64, variant="V1", two_sided=True)
    assert spec.seed == 17
    with pytest.raises(DomainError):
        parse_config("n 400")
    with pytest.raises(DomainError):
        spec_from_mapping({"dist": "gamma", "bogus": "1"})
    with pytest.raises(DomainError):
        spec_from_mapping({"cutoff": "2", "c_quantile": "0.3"})
    assert spec_from_mapping({"cutoff": "2.5"}).c == 2.5
