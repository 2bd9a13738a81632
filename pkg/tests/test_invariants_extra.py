"""Cross-module invariants: golden configs, energy sanity, rescaling
consistency, report reproducibility."""

from pathlib import Path

import numpy as np
import pytest

from fbreg.barriers import cone_supersolution, verify_inequality
from fbreg.config import parse_config, serialize
from fbreg.free_boundary import blow_up_rescale, classify_point, fit_growth_exponent
from fbreg.grids import GridFunction, uniform_grid
from fbreg.kernels import fractional_laplacian
from fbreg.solver import ObstacleProblem, solve_elliptic_obstacle

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.cfg")), ids=lambda p: p.name)
def test_golden_configs_roundtrip_byte_identical(path):
    text = path.read_text()
    assert serialize(parse_config(text)) == text


def test_energy_sanity_infimum_over_supersolution_family():
    # raising the obstacle anywhere raises the solution: the base solve is
    # the pointwise infimum over the sampled family (bump = 0 included)
    kern = fractional_laplacian(0.6, dim=1)

    def base_phi(p, t=None):
        x = np.asarray(p)[..., 0]
        return np.maximum(1.0 - x * x, 0.0) ** 2

    def prob_for(bump_height, bump_center):
        def phi(p, t=None):
            x = np.asarray(p)[..., 0]
            return base_phi(p) + bump_height * np.exp(-8 * (x - bump_center) ** 2)

        return ObstacleProblem(kernel=kern, obstacle=phi, extent=2.0, nodes=65,
                               obstacle_scale=3.0)

    rng = np.random.default_rng(6)
    u0, _ = solve_elliptic_obstacle(prob_for(0.0, 0.0), tol=1e-9)
    family = [u0.values]
    for _ in range(4):
        h = float(rng.uniform(0.05, 0.4))
        c = float(rng.uniform(-1.0, 1.0))
        u, _ = solve_elliptic_obstacle(prob_for(h, c), tol=1e-9)
        family.append(u.values)
    inf_family = np.min(np.stack(family), axis=0)
    assert np.allclose(inf_family, u0.values, atol=1e-7)


def test_classifier_consistent_under_rescaling():
    # exact traveling profile: the rescaled function classifies identically
    # at every radius (homogeneity)
    kern = fractional_laplacian(0.5, dim=1)
    gamma = 0.75
    g = uniform_grid(2.0, 641, 1, 0.5, horizon=1.0, steps=640)
    x = g.axis_coords(0)
    t = g.axis_coords(1) - 0.5
    zeta = x[:, None] + 1.0 * t[None, :]
    vals = np.where(zeta > 0, np.clip(zeta, 0, None) ** (1 + gamma), 0.0)
    w = GridFunction(values=vals, h=g.h, origin=(-2.0, -0.5), s=0.5, dt=g.dt)

    base_fit = fit_growth_exponent(w, (0.0, 0.0), r_min=6 * w.h, r_max=0.4)
    base_cls = classify_point(base_fit.beta, 1.0, kern, normal_space=[1.0])
    assert base_cls.kind == "regular"
    for r in (0.5, 0.25):
        resc = blow_up_rescale(w, (0.0, 0.0), r, norm_mode="sup",
                               out_nodes=129, out_steps=128)
        fit = fit_growth_exponent(resc, (0.0, 0.0), r_min=6 * resc.h, r_max=0.5)
        cls = classify_point(fit.beta, 1.0, kern, normal_space=[1.0])
        assert cls.kind == base_cls.kind == "regular"
        assert cls.gamma == base_cls.gamma


def test_barrier_report_bit_reproducible():
    kern = fractional_laplacian(0.5, dim=2)
    bar = cone_supersolution([1.0, 0.0], eta=0.5, theta_exp=0.2)
    pts = np.array([[0.5, 0.1], [1.0, 0.3], [0.8, -0.2]])
    rep1 = verify_inequality(kern, bar, pts, refinement_levels=2, h0=0.1)
    rep2 = verify_inequality(kern, bar, pts, refinement_levels=2, h0=0.1)
    assert rep1.margins == rep2.margins
    assert rep1.observed == rep2.observed
