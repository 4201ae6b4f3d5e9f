from loguru import logger
from zenml import pipeline

from steps.harness import evaluate_detector, generate_desk_scenes, train_detector


@pipeline
def desk_experiment(
    seed: int = 7,
    count: int = 20,
    run_config: dict | None = None,
    steps: int = 100,
    output_dir: str = "outputs",
) -> None:
    """generate -> train -> evaluate on the same synthetic scenes."""

    logger.info(f"desk_experiment: seed={seed} count={count} steps={steps}")
    scenes = generate_desk_scenes(seed=seed, count=count, run_config=run_config)
    checkpoint_path = train_detector(scenes=scenes, run_config=run_config, steps=steps, output_dir=output_dir)
    evaluate_detector(scenes=scenes, checkpoint_path=checkpoint_path)
