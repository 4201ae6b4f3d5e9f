# zenml step: generate the synthetic training scenes of one experiment.

from loguru import logger
from typing_extensions import Annotated
from zenml import get_step_context, step

from simpb_desk.application.synthetic import generate_scenes
from simpb_desk.domain import RunConfig, Scene


@step
def generate_desk_scenes(
    seed: int,
    count: int,
    run_config: dict | None = None,
) -> Annotated[list[Scene], "scenes"]:
    """Generate `count` scenes (or sequences) from `seed`.

    Args:
        seed: Generation seed.
        count: Number of scenes, or of sequences when the config asks for sequences.
        run_config: RunConfig as a flat dict; defaults when omitted.

    Returns:
        list[Scene]: The generated frames in order.
    """
    run = RunConfig.from_dict(run_config or {})
    scenes = generate_scenes(seed, count, run.scene)
    logger.info(f"Generated {len(scenes)} frames from seed {seed}")

    step_context = get_step_context()
    step_context.add_output_metadata(
        output_name="scenes",
        metadata={
            "len_scenes": len(scenes),
            "num_objects": sum(len(scene.objects) for scene in scenes),
            "num_labels_2d": sum(len(scene.ground_truth_2d) for scene in scenes),
        },
    )
    return scenes
