import io
import json

import pytest
from hypothesis import given, strategies as st

from harvestplan.model import (
    ArmState,
    ConfigError,
    Fruit,
    FruitMap,
    FruitMapError,
    HarvesterConfig,
    KinematicLimits,
    cell_bounds,
    dump_config,
    load_fruit_map,
    parse_config_text,
    validate_config,
    write_fruit_map,
)

from conftest import cfg_for


def test_reference_geometry_is_valid(reference_cfg):
    cfg = HarvesterConfig(rows=3, cells=4, cell_length=0.6, frame_height=2.0,
                          limits=KinematicLimits(1.0, 1.0), dt=0.1)
    assert validate_config(cfg) == []
    assert validate_config(reference_cfg) == []


def test_zero_cell_length_names_the_field():
    problems = validate_config(HarvesterConfig(cell_length=0.0))
    assert [p.field for p in problems] == ["cell_length"]


def test_initial_heights_must_increase_with_row():
    states = (ArmState(-0.3, 1.5), ArmState(-0.3, 0.5))
    problems = validate_config(HarvesterConfig(rows=2, initial_arm_states=states))
    assert len(problems) == 1 and "increase" in problems[0].message


def test_wrong_number_of_initial_states():
    problems = validate_config(HarvesterConfig(rows=2, cells=2, initial_arm_states=(ArmState(0, 1),)))
    assert problems[0].field == "initial_arm_states"


@pytest.mark.parametrize("name,value", [("dt", 0.0), ("epsilon_v", -1.0), ("td_grasp", -0.1),
                                        ("frame_height", 0.0), ("front_clearance", -1.0),
                                        ("picking_duration_mode", "fast"), ("claim_order", "middle")])
def test_each_invariant_is_reported(name, value):
    assert [p.field for p in validate_config(HarvesterConfig(**{name: value}))] == [name]


def test_check_raises_config_error():
    with pytest.raises(ConfigError, match="cell_length"):
        HarvesterConfig(cell_length=-1).check()


def test_default_clearance_is_braking_distance():
    assert HarvesterConfig(limits=KinematicLimits(2.0, 4.0)).clearance == 0.5


def test_default_arm_states_sit_mid_cell():
    cfg = cfg_for(2, 2)
    xs = [s.px for s in cfg.arm_states()]
    zs = [s.pz for s in cfg.arm_states()]
    assert xs == pytest.approx([-0.3, -0.3, -0.9, -0.9])
    assert zs == pytest.approx([2 / 3, 4 / 3, 2 / 3, 4 / 3])
    assert all(s.vx is None for s in cfg.arm_states())


@pytest.mark.parametrize("c,t,v,expected", [(1, 0.0, 0.0, (-0.6, 0.0)), (2, 0.0, 0.0, (-1.2, -0.6)),
                                            (1, 10.0, 0.1, (0.4, 1.0))])
def test_cell_bounds(c, t, v, expected):
    assert cell_bounds(HarvesterConfig(cells=2), c, t, v) == pytest.approx(expected)


@given(c=st.integers(1, 8), t=st.floats(0, 1e4), v=st.floats(0, 2), length=st.floats(0.01, 5),
       x0=st.floats(-100, 100))
def test_cell_width_is_constant(c, t, v, length, x0):
    rear, front = cell_bounds(HarvesterConfig(cells=8, cell_length=length, x_front_init=x0), c, t, v)
    assert front - rear == pytest.approx(length, rel=1e-9, abs=1e-9)


def test_map_sorted_by_x_then_z_then_id():
    fm = FruitMap((Fruit(3, 1.0, 0, 0.5), Fruit(1, 0.2, 0, 1.0), Fruit(2, 1.0, 0, 0.2), Fruit(0, 1.0, 0, 0.2)))
    assert [f.id for f in fm] == [1, 0, 2, 3]
    assert fm[3].z == 0.5


@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(0, 1), st.floats(0, 2)), max_size=30))
def test_map_ordering_is_total(rows):
    fruits = [Fruit(i, *r) for i, r in enumerate(rows)]
    a = FruitMap(tuple(fruits))
    b = FruitMap(tuple(reversed(fruits)))
    assert a == b
    keys = [(f.x, f.z, f.id) for f in a]
    assert keys == sorted(keys)


def test_load_sorts_out_of_order_records():
    fm = load_fruit_map(io.StringIO("id,x,y,z\n0,3.0,0.1,1\n1,1.0,0.1,1\n2,2.0,0.1,1\n"))
    assert [f.x for f in fm] == [1.0, 2.0, 3.0]


def test_load_rejects_height_out_of_range_naming_id():
    with pytest.raises(FruitMapError, match="fruit 7"):
        load_fruit_map(io.StringIO("id,x,y,z\n7,1.0,0.1,2.1\n"), height=2.0)


def test_load_rejects_duplicate_id():
    with pytest.raises(FruitMapError, match="duplicate fruit id 4"):
        load_fruit_map(io.StringIO("id,x,y,z\n4,1,0,1\n4,2,0,1\n"))


def test_malformed_record_names_line():
    with pytest.raises(FruitMapError, match="line 3"):
        load_fruit_map(io.StringIO("id,x,y,z\n0,1,0,1\n1,oops,0,1\n"))


def test_bad_header():
    with pytest.raises(FruitMapError, match="header"):
        load_fruit_map(io.StringIO("a,b,c,d\n0,1,0,1\n"))


def test_json_errors_name_record_index():
    with pytest.raises(FruitMapError, match="record 1"):
        load_fruit_map(io.StringIO(json.dumps([{"id": 0, "x": 1, "y": 0, "z": 1}, {"id": 1, "x": 1}])))


def test_negative_depth_rejected():
    with pytest.raises(FruitMapError):
        FruitMap((Fruit(0, 0.0, -0.1, 1.0),))


@pytest.mark.parametrize("suffix", [".csv", ".json"])
def test_fruit_map_round_trip(tmp_path, suffix):
    fm = FruitMap((Fruit(0, 0.1234567890123, 0.3, 1.5), Fruit(5, 2.5, 0.0, 0.25)))
    path = tmp_path / f"m{suffix}"
    write_fruit_map(fm, path)
    assert load_fruit_map(path) == fm


def test_config_text_round_trip():
    cfg = HarvesterConfig(rows=2, cells=3, dt=0.05, limits=KinematicLimits(1.5, 0.8),
                          initial_arm_states=tuple(ArmState(-0.3 - 0.6 * (i // 2), 0.5 + i % 2, None, 0.0)
                                                   for i in range(6)),
                          claim_order="rear-first")
    assert parse_config_text(dump_config(cfg)) == cfg


def test_config_text_comments_and_unknown_keys():
    cfg = parse_config_text("# geometry\nrows = 3  # stacked\ncells = 2\nv_max = 1.2\n")
    assert (cfg.rows, cfg.cells, cfg.limits.v_max) == (3, 2, 1.2)
    with pytest.raises(ConfigError, match="unknown"):
        parse_config_text("row = 3\n")
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("rows = 1\nnonsense\n")
