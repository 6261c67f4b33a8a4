import os

from .schemas import OptimizerConfig


def _env_number(
    name: str,
    cast: type,
):
    value = os.getenv(name)
    if value is None or value.strip() == "":
        return None
    return cast(value)


def get_optimizer_config(
    tolerance: float | None = None,
    max_iterations: int | None = None,
    restarts: int | None = None,
    seed: int | None = None,
):
    overrides = {
        "tolerance": tolerance if tolerance is not None else _env_number("RELAYCAP_TOLERANCE", float),
        "max_iterations": (
            max_iterations
            if max_iterations is not None
            else _env_number("RELAYCAP_MAX_ITERATIONS", int)
        ),
        "restarts": restarts if restarts is not None else _env_number("RELAYCAP_RESTARTS", int),
        "seed": seed if seed is not None else _env_number("RELAYCAP_SEED", int),
    }
    return OptimizerConfig(**{key: value for key, value in overrides.items() if value is not None})


def get_worker_count():
    threads = _env_number("RELAYCAP_THREADS", int) or 0
    if threads < 0:
        raise ValueError(f"RELAYCAP_THREADS must be >= 0, got {threads}")
    # 0 = auto
    return threads or (os.cpu_count() or 1)
