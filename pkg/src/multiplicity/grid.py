import logging

from multiplicity.models import GridSpec, RunConfig

logger = logging.getLogger(__name__)


def expand_grid(grid: GridSpec) -> list[RunConfig]:
    """
    Enumerate every run of a one-factor-at-a-time grid.

    The default config is trained once per seed and shared by every table,
    so the count is seeds x (1 + sum over axes of (choices - 1)).
    Order: per seed, the default first, then each axis's non-default choices
    in grid order.
    """
    seedless: list[RunConfig] = [grid.seedless_default]
    for axis in grid.axes:
        for variant in grid.variants(axis.name):
            if variant not in seedless:
                seedless.append(variant)

    runs = [config.with_value("seed", seed) for seed in grid.seeds for config in seedless]
    logger.debug(f"Expanded grid into {len(runs)} runs ({len(seedless)} per seed)")
    return runs
