from .evaluate import evaluate_detector
from .generate import generate_desk_scenes
from .train import train_detector

__all__ = ["evaluate_detector", "generate_desk_scenes", "train_detector"]
