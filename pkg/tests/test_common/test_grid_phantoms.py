import numpy as np
import pytest

from iscat.common.errors import EmptyPhantomError, InvalidArgumentError, ShapeMismatchError
from iscat.common.grid import ContrastMap, GridSpec, make_grid
from iscat.common.phantoms import (
    AUSTRIA_DISK_CENTERS,
    AUSTRIA_RING_CENTER,
    AUSTRIA_RING_RADII,
    POLYGON_RADIUS_RANGE,
    PhantomRecipe,
    RegularPolygon,
    austria_phantom,
    austria_scale,
    digit_phantom,
    disk_phantom,
    make_phantom,
    sample_polygons,
)

LAMBDA0 = 0.075


def _nearest_pixel(grid, point):
    d = np.hypot(grid.centers()[:, 0] - point[0], grid.centers()[:, 1] - point[1])
    return np.unravel_index(np.argmin(d), grid.shape)


def _inside_convex(vertices, p):
    # Ray casting, independent of the half-plane test used by the phantoms
    inside = False
    n = len(vertices)
    for k in range(n):
        (x0, y0), (x1, y1) = vertices[k], vertices[(k + 1) % n]
        if (y0 > p[1]) != (y1 > p[1]):
            x_cross = x0 + (p[1] - y0) * (x1 - x0) / (y1 - y0)
            if p[0] < x_cross:
                inside = not inside
    return inside


def test_grid_geometry():
    grid = make_grid(8, 4, 0.8, 0.4, LAMBDA0, center=(1.0, -2.0))
    assert grid.shape == (4, 8)
    assert grid.n_pixels == 32
    assert grid.dx == pytest.approx(0.1) and grid.dy == pytest.approx(0.1)
    assert grid.x.mean() == pytest.approx(1.0), f"x centers not symmetric: {grid.x}"
    assert grid.y.mean() == pytest.approx(-2.0), f"y centers not symmetric: {grid.y}"

    centers = grid.centers()
    assert centers.shape == (32, 2)
    # Row-major: the second center moves along x
    assert centers[1, 0] - centers[0, 0] == pytest.approx(0.1)
    assert centers[1, 1] == centers[0, 1]
    assert grid.contains(centers).all()
    assert not grid.contains(np.array([[1.41, -2.0]]))[0]

    assert GridSpec.from_dict(grid.to_dict()) == grid


@pytest.mark.parametrize("kwargs", [dict(nx=3), dict(side_x=0.0), dict(lambda0=-1.0)])
def test_grid_rejects_invalid(kwargs):
    args = dict(nx=8, ny=8, side_x=1.0, side_y=1.0, lambda0=LAMBDA0)
    args.update(kwargs)
    with pytest.raises(InvalidArgumentError):
        make_grid(**args)


def test_contrast_map(grid8):
    chi = ContrastMap(grid8, np.full(grid8.shape, 1.0 + 0.5j))
    assert np.all(chi.eps_r == 2.0 + 0.5j)
    assert chi.flat().shape == (64,)
    assert np.array_equal(ContrastMap.from_flat(grid8, chi.flat()).chi, chi.chi)
    with pytest.raises(ShapeMismatchError):
        ContrastMap(grid8, np.zeros((4, 4)))
    with pytest.raises(InvalidArgumentError):
        ContrastMap(grid8, np.full(grid8.shape, np.nan))


def test_polygon_mask_matches_ray_casting(rng):
    grid = make_grid(24, 24, 2 * LAMBDA0, 2 * LAMBDA0, LAMBDA0)
    centers = grid.centers()
    for sides in range(3, 8):
        poly = RegularPolygon(
            center=tuple(rng.uniform(-0.5, 0.5, size=2) * LAMBDA0),
            radius=float(rng.uniform(0.3, 0.9)) * LAMBDA0,
            sides=sides,
            rotation=float(rng.uniform(0, 2 * np.pi / sides)),
            eps=2.0,
        )
        expected = np.array([_inside_convex(poly.vertices(), p) for p in centers]).reshape(grid.shape)
        mismatch = np.count_nonzero(poly.mask(grid) != expected)
        assert mismatch == 0, f"{sides}-gon: {mismatch} pixels disagree with ray casting"


def test_sampled_polygons_within_ranges():
    grid = make_grid(32, 32, 2 * LAMBDA0, 2 * LAMBDA0, LAMBDA0)
    for seed in range(20):
        recipe = PhantomRecipe("polygon", (1.5, 3.0), seed)
        polygons = sample_polygons(recipe, grid)
        assert 1 <= len(polygons) <= 3
        for p in polygons:
            assert 3 <= p.sides <= 7
            assert POLYGON_RADIUS_RANGE[0] <= p.radius / LAMBDA0 <= POLYGON_RADIUS_RANGE[1]
            assert 1.5 <= p.eps <= 3.0
            assert p.mask(grid).any(), f"seed {seed}: polygon covers no pixel"

        chi = make_phantom(recipe, grid).chi
        values = np.unique(chi[chi != 0])
        assert np.all((values.real >= 0.5) & (values.real <= 2.0)), f"seed {seed}: {values}"
        assert np.all(values.imag == 0)


def test_phantoms_are_reproducible(grid16):
    for kind in ("digit", "polygon", "disk"):
        a = make_phantom(PhantomRecipe(kind, (1.0, 5.0), 42), grid16)
        b = make_phantom(PhantomRecipe(kind, (1.0, 5.0), 42), grid16)
        assert np.array_equal(a.chi, b.chi), f"{kind} phantom is not reproducible"


def test_digit_phantom_orientation(grid8):
    raster = np.zeros((28, 28), dtype=np.uint8)
    raster[:7, :] = 255
    chi = digit_phantom(raster, 3.0, grid8).chi
    # First raster row is the top of the image, the largest y
    assert np.all(chi[-2:, :] == 2.0), f"top rows should be filled:\n{chi.real}"
    assert np.all(chi[:-2, :] == 0.0)

    with pytest.raises(EmptyPhantomError):
        digit_phantom(np.zeros((28, 28)), 3.0, grid8)
    with pytest.raises(InvalidArgumentError):
        digit_phantom(raster, 0.5, grid8)


def test_austria_layout():
    grid = make_grid(32, 32, 5.6 * LAMBDA0, 5.6 * LAMBDA0, LAMBDA0)
    assert austria_scale(grid) == pytest.approx(1.0)
    chi = austria_phantom(1.5, 2.5, 4.0, grid).chi

    left = _nearest_pixel(grid, np.array(AUSTRIA_DISK_CENTERS[0]) * LAMBDA0)
    right = _nearest_pixel(grid, np.array(AUSTRIA_DISK_CENTERS[1]) * LAMBDA0)
    mid = 0.5 * sum(AUSTRIA_RING_RADII)
    ring = _nearest_pixel(grid, (AUSTRIA_RING_CENTER[0] * LAMBDA0, (AUSTRIA_RING_CENTER[1] - mid) * LAMBDA0))
    hole = _nearest_pixel(grid, np.array(AUSTRIA_RING_CENTER) * LAMBDA0)

    assert chi[left] == 0.5
    assert chi[right] == 1.5
    assert chi[ring] == 3.0
    assert chi[hole] == 0.0
    assert chi[0, 0] == 0.0
    assert set(np.unique(chi.real)) == {0.0, 0.5, 1.5, 3.0}


def test_austria_scales_with_grid():
    grid = make_grid(32, 32, 2 * LAMBDA0, 2 * LAMBDA0, LAMBDA0)
    chi = austria_phantom(2.0, 2.0, 2.0, grid, scale=austria_scale(grid)).chi
    assert np.count_nonzero(chi) > 0
    # Nothing reaches the DOI border at this scale
    assert not np.any(chi[0, :]) and not np.any(chi[-1, :])
    assert not np.any(chi[:, 0]) and not np.any(chi[:, -1])


def test_disk_phantom(grid16):
    chi = disk_phantom(2.0, 0.25 * LAMBDA0, grid16).chi
    xx, yy = grid16.mesh()
    expected = np.hypot(xx, yy) <= 0.25 * LAMBDA0
    assert np.array_equal(chi != 0, expected)
    with pytest.raises(InvalidArgumentError):
        disk_phantom(2.0, 0.0, grid16)


def test_recipe_rejects_unknown_kind():
    with pytest.raises(InvalidArgumentError):
        PhantomRecipe("spiral")
    with pytest.raises(InvalidArgumentError):
        PhantomRecipe("disk", eps_range=(0.5, 2.0))
