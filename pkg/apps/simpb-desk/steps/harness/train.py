from pathlib import Path

from typing_extensions import Annotated
from zenml import get_step_context, step

from simpb_desk.application.model import Trainer
from simpb_desk.domain import RunConfig, Scene
from simpb_desk.infrastructure import checkpoint_from_trainer, save_checkpoint


@step
def train_detector(
    scenes: list[Scene],
    run_config: dict | None = None,
    steps: int = 100,
    output_dir: str = "outputs",
) -> Annotated[str, "checkpoint_path"]:
    """Train a fresh detector on `scenes` and write its checkpoint.

    Returns:
        str: Path of the written checkpoint.
    """
    run = RunConfig.from_dict(run_config or {})
    trainer = Trainer(run, scenes, output_dir=Path(output_dir))
    trainer.fit(steps)
    path = Path(output_dir) / "desk_experiment.ckpt"
    save_checkpoint(path, checkpoint_from_trainer(trainer))

    step_context = get_step_context()
    step_context.add_output_metadata(
        output_name="checkpoint_path",
        metadata={
            "steps": trainer.step,
            "final_loss": trainer.loss_history[-1] if trainer.loss_history else None,
            "num_parameters": int(sum(p.size for p in trainer.detector.store)),
        },
    )
    return str(path)
