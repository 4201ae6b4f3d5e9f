import json
import math
import struct
from collections import OrderedDict

import numpy as np
import pytest

from simpb_desk.application.geometry import project_anchors
from simpb_desk.application.model import Trainer
from simpb_desk.application.synthetic import (
    generate_scene,
    generate_scenes,
    rasterize_array,
    rasterize_features,
    rasterize_scene,
    scene_seeds,
)
from simpb_desk.domain import (
    Anchor3D,
    Detection2D,
    Detection3D,
    DetectionRecord,
    RasterConfig,
    RunConfig,
    Scene,
    SceneGenConfig,
    SceneObject,
)
from simpb_desk.exceptions import ConfigError, DataError, UsageError
from simpb_desk.infrastructure import (
    MAGIC,
    Checkpoint,
    checkpoint_from_trainer,
    load_checkpoint,
    load_detections,
    load_scenes,
    restore_detector,
    restore_trainer,
    save_checkpoint,
    save_detections,
    save_scenes,
)

from .conftest import CONFIGS, front_camera


class TestGenerator:
    def test_deterministic(self, small_scene_config):
        assert generate_scenes(7, 3, small_scene_config) == generate_scenes(7, 3, small_scene_config)
        assert generate_scenes(7, 3, small_scene_config) != generate_scenes(8, 3, small_scene_config)

    def test_fixed_object_count(self, small_scene_config):
        config = small_scene_config.model_copy(update={"object_count_range": (3, 3)})
        assert all(len(scene.objects) == 3 for scene in generate_scenes(1, 3, config))

    def test_every_scene_has_a_straddling_object(self, small_scene_config):
        for scene in generate_scenes(2, 5, small_scene_config):
            cameras = {}
            for label in scene.ground_truth_2d:
                cameras.setdefault(label.object_id, set()).add(label.camera)
            assert any(len(c) >= 2 for c in cameras.values())

    def test_labels_follow_projection(self, small_scene_config):
        scene = generate_scene(4, small_scene_config)
        for label in scene.ground_truth_2d:
            obj = scene.object_by_id(label.object_id)
            proj = project_anchors(obj.anchor.as_array()[None], scene.rig[label.camera])
            assert proj.valid[0]
            np.testing.assert_allclose(label.box.corners(), proj.rect[0], atol=1e-9)
            assert label.truncated == bool(proj.truncated[0])
            assert -math.pi < label.alpha <= math.pi

    def test_objects_respect_depth_range(self, small_scene_config):
        near, far = small_scene_config.depth_range
        for scene in generate_scenes(3, 5, small_scene_config):
            for obj in scene.objects:
                assert near - 1e-9 <= math.hypot(obj.anchor.x, obj.anchor.y) <= far + 1e-9

    def test_straddle_needs_overlap(self):
        config = SceneGenConfig(camera_yaws_deg=[-90.0, 90.0])
        with pytest.raises(ConfigError):
            generate_scene(0, config)

    def test_sequences(self, small_scene_config):
        config = small_scene_config.model_copy(update={"sequence_length": 3})
        scenes = generate_scenes(9, 2, config)
        assert len(scenes) == 6
        assert [s.frame_index for s in scenes] == [0, 1, 2, 0, 1, 2]
        assert scenes[0].sequence_id == scenes[2].sequence_id != scenes[3].sequence_id
        assert scenes[0].ego_pose_delta is None
        assert scenes[1].ego_pose_delta is not None

    def test_seeds_are_distinct(self):
        seeds = scene_seeds(7, 50)
        assert len(set(seeds)) == 50
        assert scene_seeds(7, 50) == seeds


def two_box_scene(objects_order=(0, 1)) -> Scene:
    objects = [
        SceneObject(object_id=0, class_id=0, anchor=Anchor3D(x=10.0, y=0.0, z=1.5, w=1.0, l=1.0, h=1.0)),
        SceneObject(object_id=1, class_id=1, anchor=Anchor3D(x=20.0, y=0.0, z=1.5, w=4.0, l=4.0, h=3.0)),
    ]
    return Scene(scene_id="two", rig=[front_camera()], objects=[objects[i] for i in objects_order])


class TestRasterizer:
    def test_channels(self, small_scene_config):
        scene = generate_scene(4, small_scene_config)
        rasters = rasterize_scene(scene, RasterConfig(), 2)
        assert len(rasters) == 2
        assert rasters[0].shape == (32, 64, 6)
        values = rasters[0].values
        np.testing.assert_allclose(values[0, :, 4], (np.arange(64) + 0.5) / 64)
        np.testing.assert_allclose(values[:, 0, 5], (np.arange(32) + 0.5) / 32)
        assert set(np.unique(values[:, :, 0])) <= {0.0, 1.0}

    def test_nearest_box_wins(self):
        raster = rasterize_array(two_box_scene(), 0, RasterConfig(), 2)
        center = raster[48, 96]
        assert center[0] == 1.0
        assert center[1] == pytest.approx(0.4)
        assert center[2] == 1.0 and center[3] == 0.0

    def test_independent_of_object_order(self):
        a = rasterize_array(two_box_scene((0, 1)), 0, RasterConfig(), 2)
        b = rasterize_array(two_box_scene((1, 0)), 0, RasterConfig(), 2)
        np.testing.assert_array_equal(a, b)

    def test_without_coordinates(self):
        raster = rasterize_array(two_box_scene(), 0, RasterConfig(coord_channels=False), 2)
        assert raster.shape == (96, 192, 4)

    def test_rejects_unknown_camera(self):
        with pytest.raises(UsageError):
            rasterize_array(two_box_scene(), 3, RasterConfig(), 2)

    def test_rejects_indivisible_patch(self):
        with pytest.raises(UsageError):
            rasterize_features(two_box_scene(), 0, RasterConfig(patch_size=7), 2)


class TestSceneFiles:
    def test_round_trip(self, tmp_path, small_scene_config):
        scenes = generate_scenes(5, 3, small_scene_config)
        save_scenes(tmp_path / "scenes.jsonl", scenes)
        assert load_scenes(tmp_path / "scenes.jsonl") == scenes

    def test_fixture(self, fixtures_dir):
        scenes = load_scenes(fixtures_dir / "minimal_scene.jsonl")
        assert len(scenes) == 1
        scene = scenes[0]
        assert scene.scene_id == "minimal-0"
        assert scene.objects[0].anchor.x == 10.0
        assert scene.labels_for_camera(0)[0].truncated is False

    def test_truncated_line(self, tmp_path, fixtures_dir):
        line = (fixtures_dir / "minimal_scene.jsonl").read_text(encoding="utf-8").splitlines()[0]
        path = tmp_path / "cut.jsonl"
        path.write_text(line + "\n" + line[: len(line) // 2] + "\n", encoding="utf-8")
        with pytest.raises(DataError, match="line 2"):
            load_scenes(path)

    def test_version_mismatch(self, fixtures_dir):
        with pytest.raises(DataError, match="schema_version"):
            load_scenes(fixtures_dir / "future_version.jsonl")

    def test_invalid_record(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"schema_version": 1, "scene_id": "x"}\n', encoding="utf-8")
        with pytest.raises(DataError, match="invalid Scene"):
            load_scenes(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_scenes(tmp_path / "nope.jsonl")


def test_detection_round_trip(tmp_path):
    record = DetectionRecord(
        scene_id="s",
        detections_3d=[Detection3D(id=0, anchor=(1, 2, 3, 1, 1, 1, 0.1, 0, 0), class_id=1, score=0.5)],
        detections_2d=[
            Detection2D(id=0, camera=1, cx=5, cy=6, w=2, h=3, class_id=1, score=0.4, linked_3d_id=0)
        ],
    )
    path = tmp_path / "dets.jsonl"
    save_detections(path, [record])
    assert '"class":1' in path.read_text(encoding="utf-8")
    assert load_detections(path) == [record]


def test_duplicate_links_are_rejected():
    det = Detection2D(id=0, camera=0, cx=5, cy=6, w=2, h=3, class_id=0, score=0.4, linked_3d_id=0)
    with pytest.raises(ValueError):
        DetectionRecord(scene_id="s", detections_2d=[det, det.model_copy(update={"id": 1})])


def write_raw_checkpoint(path, header: dict, payload: bytes = b"") -> None:
    encoded = json.dumps(header).encode("utf-8")
    path.write_bytes(MAGIC + struct.pack("<Q", len(encoded)) + encoded + payload)


class TestCheckpoint:
    @pytest.fixture
    def trainer(self, tiny_run):
        return Trainer(tiny_run, generate_scenes(13, 2, tiny_run.scene))

    def test_bit_exact_round_trip(self, tmp_path, trainer):
        trainer.fit(1)
        checkpoint = checkpoint_from_trainer(trainer)
        save_checkpoint(tmp_path / "run.ckpt", checkpoint)
        loaded = load_checkpoint(tmp_path / "run.ckpt")
        assert loaded.step == 1
        assert loaded.loss_history == checkpoint.loss_history
        assert loaded.config == checkpoint.config
        assert list(loaded.tensors) == list(checkpoint.tensors)
        for name, values in checkpoint.tensors.items():
            np.testing.assert_array_equal(loaded.tensors[name], values, err_msg=name)
        assert any(name.startswith("adam.m.") for name in loaded.tensors)

    def test_restored_detector_matches(self, tmp_path, trainer, tiny_run):
        trainer.fit(1)
        save_checkpoint(tmp_path / "run.ckpt", checkpoint_from_trainer(trainer))
        restored = restore_detector(load_checkpoint(tmp_path / "run.ckpt"))
        scene = trainer.scenes[0]
        rasters = rasterize_scene(scene, tiny_run.raster, tiny_run.model.num_classes)
        expected = trainer.detector.detections(trainer.detector.forward(scene, rasters), scene.scene_id)
        assert restored.detections(restored.forward(scene, rasters), scene.scene_id) == expected

    def test_resume_reproduces_uninterrupted_run(self, tmp_path, tiny_run):
        scenes = generate_scenes(13, 2, tiny_run.scene)
        straight = Trainer(tiny_run, scenes)
        straight.fit(2)

        first = Trainer(tiny_run, scenes)
        first.fit(1)
        save_checkpoint(tmp_path / "half.ckpt", checkpoint_from_trainer(first))
        resumed = restore_trainer(load_checkpoint(tmp_path / "half.ckpt"), scenes)
        resumed.fit(1)

        assert resumed.step == 2
        assert resumed.loss_history == straight.loss_history
        for (name, a), (_, b) in zip(straight.detector.store.items(), resumed.detector.store.items()):
            np.testing.assert_array_equal(a.values, b.values, err_msg=name)

    def test_empty_checkpoint(self, tmp_path):
        save_checkpoint(tmp_path / "empty.ckpt", Checkpoint(config={"num_queries": 4}))
        loaded = load_checkpoint(tmp_path / "empty.ckpt")
        assert loaded.tensors == OrderedDict()
        assert loaded.config == {"num_queries": 4}

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOTACKPT" + b"\x00" * 16)
        with pytest.raises(DataError, match="magic"):
            load_checkpoint(path)

    def test_truncated_payload(self, tmp_path):
        save_checkpoint(tmp_path / "run.ckpt", Checkpoint(config={}, tensors=OrderedDict(w=np.ones((3, 3)))))
        raw = (tmp_path / "run.ckpt").read_bytes()
        (tmp_path / "cut.ckpt").write_bytes(raw[:-8])
        with pytest.raises(DataError, match="past the end"):
            load_checkpoint(tmp_path / "cut.ckpt")

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "cut.ckpt"
        path.write_bytes(MAGIC + struct.pack("<Q", 1000) + b"{}")
        with pytest.raises(DataError, match="truncated"):
            load_checkpoint(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "v2.ckpt"
        write_raw_checkpoint(path, {"version": 2, "config": {}, "manifest": []})
        with pytest.raises(DataError, match="version"):
            load_checkpoint(path)

    def test_overlapping_entries(self, tmp_path):
        path = tmp_path / "overlap.ckpt"
        manifest = [{"name": "a", "shape": [2], "offset": 0}, {"name": "b", "shape": [2], "offset": 8}]
        write_raw_checkpoint(path, {"version": 1, "config": {}, "manifest": manifest}, b"\x00" * 24)
        with pytest.raises(DataError, match="overlaps"):
            load_checkpoint(path)

    def test_config_mismatch(self, tmp_path, tiny_run):
        checkpoint = Checkpoint(config=tiny_run.to_dict(), tensors=OrderedDict(w=np.ones(2)))
        with pytest.raises(DataError):
            restore_detector(checkpoint)


def test_ablation_configs_cover_distinct_topologies():
    runs = [RunConfig.from_file(path) for path in sorted(CONFIGS.glob("ablation_*.toml"))]
    assert len(runs) == 6
    topologies = {(r.model.num_layers_2d, r.model.num_layers_3d, r.model.num_hybrid) for r in runs}
    assert len(topologies) == 6
    assert all((l2d + l3d) * hybrid == 6 for l2d, l3d, hybrid in topologies)
