import argparse
import time

import numpy as np

from iscat.common.grid import make_grid
from iscat.common.phantoms import disk_phantom
from iscat.forward.greens import build_greens, incident_field
from iscat.forward.scene import make_scene
from iscat.forward.solver import solve_total_field
from iscat.utils.threads import init_threads


def _time(fn, trials, warmup):
    for _ in range(warmup):
        fn()
    tic = time.perf_counter()
    for _ in range(trials):
        fn()
    return (time.perf_counter() - tic) / trials


def main():

    parser = argparse.ArgumentParser(description="Green's operator and total-field solver benchmark")
    parser.add_argument('--cells', default=32, type=int, help='grid cells per side')
    parser.add_argument('--side', default=2.0, type=float, help='DOI side in wavelengths')
    parser.add_argument('--antennas', default=16, type=int, help='transmitters and receivers')
    parser.add_argument('--eps', default=2.0, type=float, help='disk permittivity')
    parser.add_argument('--trials', default=20, type=int, help='Number of Trials to Execute')
    parser.add_argument('--warmup-trials', default=2, type=int, help='Warmup Trials to discard')
    parser.add_argument('--threads', default=1, type=int)
    parser.add_argument('--skip-solve', action='store_true', help='Only time operator application.')

    args = parser.parse_args()
    init_threads(args.threads)

    lambda0 = 0.075
    side = args.side * lambda0
    grid = make_grid(args.cells, args.cells, side, side, lambda0)
    scene = make_scene(grid, args.antennas, args.antennas, 2.0 * args.side * lambda0)
    ops = build_greens(scene, dense=True)

    rng = np.random.default_rng(42)
    x = rng.standard_normal((args.antennas, grid.n_pixels)) + 1j * rng.standard_normal((args.antennas, grid.n_pixels))

    t_fft = _time(lambda: ops.apply_gd(x, backend="fft"), args.trials, args.warmup_trials)
    t_dense = _time(lambda: ops.apply_gd(x, backend="dense"), args.trials, args.warmup_trials)
    print("[ GD apply ] Grid: {:4d}x{:<4d} Tx: {:3d} FFT: {:.3f} ms Dense: {:.3f} ms".format(
        args.cells, args.cells, args.antennas, t_fft * 1e3, t_dense * 1e3))

    if args.skip_solve:
        return

    chi = disk_phantom(args.eps, 0.25 * side, grid)
    einc = incident_field(scene)
    trials = max(1, args.trials // 10)
    for backend in ("dense", "krylov"):
        t = _time(lambda: solve_total_field(ops, chi, einc, backend=backend), trials, 1)
        print("[ Solve ] Grid: {:4d}x{:<4d} eps_r: {:.2f} Backend: {:7s} Time: {:.3f} s".format(
            args.cells, args.cells, args.eps, backend, t))


if __name__ == '__main__':
    main()
