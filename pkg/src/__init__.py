from .relaycap import capacity_curve, simulate_haf, theorem1_capacity

__all__ = [
    "capacity_curve",
    "simulate_haf",
    "theorem1_capacity",
]
