from .harness import evaluate_detector, generate_desk_scenes, train_detector

__all__ = ["evaluate_detector", "generate_desk_scenes", "train_detector"]
