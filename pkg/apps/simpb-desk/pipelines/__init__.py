from .desk_experiment import desk_experiment

__all__ = ["desk_experiment"]
