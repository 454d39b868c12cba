import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from behavnav.floorplan import (
    Cell, GenConfig, GenerationFailed, PlaceType, generate_floorplan, inflate_cspace, load_map, parse_map,
    reference_floorplan, replace_cells, save_map, to_ascii, to_sidecar, validate_floorplan,
)


def same_plan(a, b):
    return (np.array_equal(a.kinds, b.kinds) and a.rooms == b.rooms
            and a.landmarks == b.landmarks and a.seed == b.seed and a.cell_size == b.cell_size)


@pytest.mark.parametrize("seed", [0, 1, 17, 123])
def test_generated_maps_are_valid(seed):
    plan = generate_floorplan(seed)
    assert validate_floorplan(plan) == []
    assert len(plan.offices()) == GenConfig().n_corridors * GenConfig().offices_per_corridor
    assert len(plan.halls()) == GenConfig().n_halls


def test_generation_is_a_pure_function_of_seed():
    assert same_plan(generate_floorplan(5), generate_floorplan(5))
    assert not np.array_equal(generate_floorplan(5).kinds, generate_floorplan(6).kinds)


def test_landmark_ids_are_unique_and_within_library():
    plan = generate_floorplan(3)
    ids = [lm.id for lm in plan.landmarks]
    assert len(ids) == len(set(ids))
    assert all(0 <= i < GenConfig().library_size for i in ids)


def test_config_needing_too_many_landmarks_fails():
    with pytest.raises(GenerationFailed):
        generate_floorplan(0, GenConfig(library_size=20))


def test_bad_config_rejected():
    with pytest.raises(ValueError):
        generate_floorplan(0, GenConfig(corridor_width_cells=1))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=15, deadline=None)
def test_ascii_round_trip(seed):
    plan = generate_floorplan(seed, GenConfig(n_corridors=3, n_halls=1))
    back = parse_map(to_ascii(plan), to_sidecar(plan))
    assert same_plan(plan, back)


def test_file_round_trip(tmp_path):
    plan = reference_floorplan()
    save_map(plan, tmp_path / "ref.map")
    assert same_plan(plan, load_map(tmp_path / "ref.map"))


def test_validator_reports_blocked_door():
    plan = reference_floorplan()
    office = plan.rooms["O1"]
    blocked = replace_cells(plan, list(office.doors), Cell.WALL)
    kinds = {v.kind for v in validate_floorplan(blocked)}
    assert "NoDoor" in kinds


def test_validator_reports_split_map():
    plan = reference_floorplan()
    c1 = plan.rooms["C1"]
    mid = (c1.x0 + c1.x1) // 2
    cut = [(mid, y) for y in range(c1.y0, c1.y1)]
    kinds = {v.kind for v in validate_floorplan(replace_cells(plan, cut, Cell.WALL))}
    assert "Disconnected" in kinds


def test_reference_map_places():
    plan = reference_floorplan()
    assert {f"O{i}" for i in range(1, 9)} <= set(plan.rooms)
    assert plan.place_type_at(*plan.rooms["O1"].center) == PlaceType.OFFICE
    assert plan.place_type_at(*plan.rooms["H1"].center) == PlaceType.HALL


def _wall_distance(plan, x, y):
    ys, xs = np.nonzero(plan.walls)
    dx = np.maximum(np.maximum(xs - x, x - (xs + 1)), 0.0)
    dy = np.maximum(np.maximum(ys - y, y - (ys + 1)), 0.0)
    return float(np.sqrt(dx * dx + dy * dy).min())


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.sampled_from([0.0, 0.15, 0.3, 0.55]))
@settings(max_examples=60, deadline=None)
def test_inflation_matches_wall_distance(fx, fy, radius):
    plan = reference_floorplan()
    grid = inflate_cspace(plan, radius)
    rows, cols = grid.occupancy.shape
    i, j = int(fy * (rows - 1)), int(fx * (cols - 1))
    x, y = (j + 0.5) / grid.resolution, (i + 0.5) / grid.resolution
    d = _wall_distance(plan, x, y)
    assert grid.occupancy[i, j] == (d <= radius)


def test_negative_inflation_rejected():
    with pytest.raises(ValueError):
        inflate_cspace(reference_floorplan(), -0.1)
