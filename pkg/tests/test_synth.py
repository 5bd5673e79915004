import json

import numpy as np
import pytest

from mpc_topo.pdap import denoise
from mpc_topo.scatterer import C_M_PER_NS
from mpc_topo.synth import (
    NOISE_LABEL,
    GridSpec,
    PointReflector,
    SceneSpec,
    WallSpec,
    demo_scene,
    generate_pdap,
    load_scene,
    reflector_delay_angle,
    scene_from_dict,
    scene_to_dict,
)
from oracles import wall_point

RX1 = (10.3329, 4.3406, 9.8698)


@pytest.fixture(scope="module")
def wall_only():
    w = WallSpec(*RX1, x_span=(1.0, 8.0), peak_db=-95.0, decay_db_per_m=0.0, ridge_sigma=(0.4, 2.0))
    scene = SceneSpec(wall=w, noise_sigma_db=0.0, noise_floor_db=-130.0)
    return scene, generate_pdap(scene)


class TestPointReflectors:
    def test_peak_at_source(self):
        scene = SceneSpec(point_reflectors=[PointReflector(30.0, 150.0, -90.0)], noise_sigma_db=0.0)
        out = generate_pdap(scene)
        i, j = np.unravel_index(np.argmax(out.pdap.power), out.pdap.power.shape)
        assert out.pdap.delay_axis[i] == 30.0 and out.pdap.angle_axis[j] == 150.0
        assert out.pdap.power[i, j] == -90.0

    def test_lobe_shapes(self):
        r_par = PointReflector(30.0, 150.0, -90.0, 1.0, 3.0)
        r_dia = PointReflector(30.0, 150.0, -90.0, 1.0, 3.0, shape="diamond")
        p = generate_pdap(SceneSpec(point_reflectors=[r_par], noise_sigma_db=0.0)).pdap
        q = generate_pdap(SceneSpec(point_reflectors=[r_dia], noise_sigma_db=0.0)).pdap
        i = int(np.searchsorted(p.delay_axis, 32.0))
        j = int(np.searchsorted(p.angle_axis, 156.0))
        # (u, v) = (2, 2): paraboloid drops (4 + 4)/2, diamond drops (2 + 2)^2/2
        assert p.power[i, j] == pytest.approx(-94.0)
        assert q.power[i, j] == pytest.approx(-98.0)

    def test_positioned_reflector(self):
        d = 10.0
        tau, phi = reflector_delay_angle((5.0, 5.0), d)
        assert tau == pytest.approx(2 * np.hypot(5, 5) / C_M_PER_NS)
        assert phi == pytest.approx(45.0 + 90.0)
        # rotated world frame: same geometry, rx along +y
        scene = SceneSpec(tx=(1.0, 1.0), rx=(1.0, 11.0),
                          point_reflectors=[PointReflector(position=(-4.0, 6.0), sigma_tau=0.5, sigma_phi=2.0)],
                          noise_sigma_db=0.0)
        p = generate_pdap(scene).pdap
        i, j = np.unravel_index(np.argmax(p.power), p.power.shape)
        assert abs(p.delay_axis[i] - tau) <= 0.25 and abs(p.angle_axis[j] - phi) <= 0.5

    def test_labels(self):
        scene = SceneSpec(point_reflectors=[PointReflector(30.0, 100.0), PointReflector(60.0, 200.0)],
                          noise_sigma_db=0.0)
        out = generate_pdap(scene)
        assert set(np.unique(out.labels)) == {NOISE_LABEL, 0, 1}
        assert out.source_names == ["reflector0", "reflector1"]
        i = int(np.searchsorted(out.pdap.delay_axis, 60.0))
        j = int(np.searchsorted(out.pdap.angle_axis, 200.0))
        assert out.labels[i, j] == 1

    def test_noiseless_support(self):
        lobes = [PointReflector(30.0, 100.0, -90.0), PointReflector(60.0, 200.0, -100.0)]
        out = generate_pdap(SceneSpec(point_reflectors=lobes, noise_sigma_db=0.0, noise_floor_db=-130.0))
        s = denoise(out.pdap, -130.0)
        mask = np.zeros(out.pdap.power.shape, bool)
        mask[s.grid_index[:, 0], s.grid_index[:, 1]] = True
        assert np.array_equal(mask, out.labels != NOISE_LABEL)


class TestWall:
    def test_ridge_follows_model(self, wall_only):
        scene, out = wall_only
        p = out.pdap
        # the maximum along each angle column sits on the curve within half a delay step
        checked = 0
        for x in np.linspace(1.5, 7.5, 13):
            path, phi = wall_point(*RX1, x)
            j = int(np.argmin(np.abs(p.angle_axis - phi)))
            if abs(p.angle_axis[j] - phi) > 0.05:
                continue
            i = int(np.argmax(p.power[:, j]))
            assert abs(p.delay_axis[i] - path / C_M_PER_NS) <= 0.5 * p.delay_step + 1e-9
            checked += 1
        assert checked >= 1
        ridge = out.labels == 0
        assert ridge.sum() > 50

    def test_ridge_nodes_on_curve(self, wall_only):
        _, out = wall_only
        p = out.pdap
        ii, jj = np.nonzero(p.power >= -95.0 - 1e-9)
        xs = np.linspace(1.0, 8.0, 20001)
        curve = np.array([wall_point(*RX1, x) for x in xs])
        curve[:, 0] /= C_M_PER_NS
        for i, j in zip(ii, jj):
            d = np.hypot((curve[:, 0] - p.delay_axis[i]) / p.delay_step, (curve[:, 1] - p.angle_axis[j]) / p.angle_step)
            assert d.min() <= 0.5 + 1e-3

    def test_decay(self):
        w = WallSpec(*RX1, x_span=(8.0, 1.0), peak_db=-95.0, decay_db_per_m=2.0, ridge_sigma=(0.4, 2.0))
        out = generate_pdap(SceneSpec(wall=w, noise_sigma_db=0.0))
        assert out.pdap.power.max() <= -95.0 + 1e-12
        assert out.pdap.power.max() >= -95.5

    def test_wall_label_after_reflectors(self):
        scene = SceneSpec(point_reflectors=[PointReflector(70.0, 100.0)], wall=WallSpec(*RX1), noise_sigma_db=0.0)
        out = generate_pdap(scene)
        assert out.source_names == ["reflector0", "wall"]
        assert 1 in out.labels


class TestDeterminism:
    def test_same_seed_identical(self):
        a = generate_pdap(demo_scene(4)).pdap.power
        b = generate_pdap(demo_scene(4)).pdap.power
        assert a.tobytes() == b.tobytes()

    def test_seeds_differ(self):
        assert not np.array_equal(generate_pdap(demo_scene(1)).pdap.power, generate_pdap(demo_scene(2)).pdap.power)

    def test_demo_has_five_sources(self):
        out = generate_pdap(demo_scene(0))
        assert len(out.source_names) == 5
        assert set(np.unique(out.labels)) == {NOISE_LABEL, 0, 1, 2, 3, 4}

    def test_unjittered_demo_fixed(self):
        a = demo_scene(3, jitter=False)
        b = demo_scene(9, jitter=False)
        assert a.point_reflectors == b.point_reflectors and a.wall == b.wall


class TestSceneFiles:
    def test_round_trip(self, tmp_path):
        scene = demo_scene(7)
        path = tmp_path / "scene.json"
        path.write_text(json.dumps(scene_to_dict(scene)))
        back = load_scene(path)
        assert back == scene
        assert generate_pdap(back).pdap.power.tobytes() == generate_pdap(scene).pdap.power.tobytes()

    def test_defaults(self):
        s = scene_from_dict({"point_reflectors": [{"tau0": 30, "phi0": 150}]})
        assert s.grid == GridSpec() and s.wall is None

    def test_to_dict_has_labels(self):
        d = generate_pdap(SceneSpec(point_reflectors=[PointReflector(30.0, 150.0)])).to_dict()
        assert np.asarray(d["labels"]).shape == np.asarray(d["power_db"]).shape
        assert d["sources"] == ["reflector0"]


class TestValidation:
    @pytest.mark.parametrize("kw", [{"delay_step": 0}, {"angle_max": 10.0}])
    def test_grid(self, kw):
        with pytest.raises(ValueError):
            GridSpec(**kw)

    def test_reflector(self):
        with pytest.raises(ValueError):
            PointReflector(30.0, None)
        with pytest.raises(ValueError):
            PointReflector(30.0, 150.0, sigma_tau=0.0)
        with pytest.raises(ValueError):
            PointReflector(30.0, 150.0, shape="cone")

    def test_wall_span(self):
        with pytest.raises(ValueError):
            SceneSpec(wall=WallSpec(*RX1, x_span=(0.0, 20.0)))

    def test_wall_rx_mismatch(self):
        with pytest.raises(ValueError):
            SceneSpec(rx=(5.0, 0.0), wall=WallSpec(*RX1))

    def test_negative_noise(self):
        with pytest.raises(ValueError):
            SceneSpec(noise_sigma_db=-1.0)

    def test_positioned_needs_geometry(self):
        with pytest.raises(ValueError):
            generate_pdap(SceneSpec(point_reflectors=[PointReflector(position=(1.0, 1.0))]))
