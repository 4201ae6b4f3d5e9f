# The detector: parameters, feature embedding, the hybrid decoder and detection export.
# One SimPBDetector owns one ParameterStore; creating two detectors from the same
# RunConfig gives bit-identical parameters and initial anchors.

import numpy as np

from ...domain import Detection2D, Detection3D, DetectionRecord, RunConfig, Scene
from ...exceptions import UsageError
from ... import utils
from ..attention import AttentionConfig
from ..synthetic import rasterize_scene
from ..tensor import ParameterStore, Tensor
from .anchors import PatchEmbedding, initial_anchors
from .decoder import DecoderState, HybridDecoder, decode_forward
from .temporal import TemporalMemory, propagate_temporal

ANCHOR_SEED_OFFSET = 1


class SimPBDetector:
    """Hybrid 2D/3D multi-camera detector over rasterized inputs.

    Attributes:
        run: Full run configuration.
        store: Every learnable parameter.
        init_anchors: [N, 9] fixed starting anchors.
    """

    def __init__(self, run: RunConfig) -> None:
        self.run = run
        config = run.model
        self.store = ParameterStore(utils.make_rng(config.seed))
        attention = AttentionConfig.from_run_config(run)
        self.patch_embed = PatchEmbedding(
            self.store,
            "patch_embed",
            run.raster.input_channels(config.num_classes),
            run.raster.patch_size,
            config.embed_dims,
        )
        self.query_embed = self.store.create("query_embed", (config.num_queries, config.embed_dims), "normal")
        self.decoder = HybridDecoder(self.store, "decoder", config, attention, run.scene.bev_range)
        self.init_anchors = initial_anchors(
            config, run.scene, np.random.default_rng([config.seed, ANCHOR_SEED_OFFSET])
        )

    @property
    def config(self):
        return self.run.model

    def featmaps(self, rasters: list[Tensor]) -> list[Tensor]:
        return [self.patch_embed(raster) for raster in rasters]

    def initial_state(self, memory: TemporalMemory | None = None) -> DecoderState:
        return DecoderState(
            q3d=self.query_embed,
            anchors=self.init_anchors.copy(),
            memory=memory if memory is not None else TemporalMemory.empty(self.config.embed_dims),
        )

    def forward(self, scene: Scene, rasters: list[Tensor], memory: TemporalMemory | None = None) -> DecoderState:
        """Full decoder pass on one frame.

        Raises:
            UsageError: If the raster count does not match the scene's rig.
        """
        if len(rasters) != scene.num_cameras:
            raise UsageError(f"scene {scene.scene_id}: {len(rasters)} rasters for {scene.num_cameras} cameras")
        return decode_forward(self.decoder, self.featmaps(rasters), self.initial_state(memory), scene.rig)

    def propagate(self, state: DecoderState, next_scene: Scene) -> TemporalMemory:
        """Memory for `next_scene` from the top-K queries of `state`."""

        final = state.final_3d
        delta = np.asarray(next_scene.ego_pose_delta) if next_scene.ego_pose_delta is not None else None
        return propagate_temporal(
            state.q3d, final.anchors, final.scores(), self.config.top_k_history, delta, next_scene.frame_interval
        )

    def detections(self, state: DecoderState, scene_id: str) -> DetectionRecord:
        """Export the last 3D head and the last 2D layer as a detection record.

        Every 3D query becomes a Detection3D (id = query index); every 2D query of the last
        2D layer becomes a Detection2D linked to the 3D query that owns it.
        """
        dets_3d = []
        final = state.final_3d
        if final is not None:
            probs = 1.0 / (1.0 + np.exp(-final.cls_logits.values))
            for i, anchor in enumerate(final.anchors):
                cls = int(np.argmax(probs[i]))
                dets_3d.append(
                    Detection3D(id=i, anchor=tuple(float(a) for a in anchor), class_id=cls, score=float(probs[i, cls]))
                )
        dets_2d = []
        final_2d = state.final_2d
        if final_2d is not None:
            probs = 1.0 / (1.0 + np.exp(-final_2d.cls_logits.values))
            boxes = final_2d.boxes.values
            for j in range(boxes.shape[0]):
                cls = int(np.argmax(probs[j]))
                dets_2d.append(
                    Detection2D(
                        id=j,
                        camera=int(final_2d.cameras[j]),
                        cx=float(boxes[j, 0]),
                        cy=float(boxes[j, 1]),
                        w=max(float(boxes[j, 2]), 0.0),
                        h=max(float(boxes[j, 3]), 0.0),
                        class_id=cls,
                        score=float(probs[j, cls]),
                        linked_3d_id=int(final_2d.owners[j]),
                    )
                )
        return DetectionRecord(scene_id=scene_id, detections_3d=dets_3d, detections_2d=dets_2d)


def follows(previous: Scene | None, scene: Scene) -> bool:
    """True when `scene` is the frame right after `previous` in the same sequence."""

    return (
        previous is not None
        and scene.sequence_id is not None
        and previous.sequence_id == scene.sequence_id
        and scene.frame_index == previous.frame_index + 1
    )


def detect_scenes(detector: SimPBDetector, scenes: list[Scene]) -> list[DetectionRecord]:
    """Untaped inference over `scenes` in order, carrying temporal memory along sequences."""

    records = []
    previous: Scene | None = None
    state: DecoderState | None = None
    for scene in scenes:
        memory = None
        if state is not None and follows(previous, scene) and detector.config.top_k_history:
            memory = detector.propagate(state, scene)
        rasters = rasterize_scene(scene, detector.run.raster, detector.config.num_classes)
        state = detector.forward(scene, rasters, memory)
        records.append(detector.detections(state, scene.scene_id))
        previous = scene
    return records
