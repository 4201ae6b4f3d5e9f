import io
import math

import numpy as np
import pytest
from rich.console import Console

from simpb_desk.application.evaluation import (
    MatchPredicateParams,
    aar_recall,
    average_precision_2d,
    center_error_3d,
    evaluate_detections,
    every_point_interpolation,
    greedy_center_matches,
    pair_records,
    phi,
    psi,
    render_report,
)
from simpb_desk.application.synthetic import derive_ground_truth, generate_scenes
from simpb_desk.domain import Anchor3D, Box2D, Detection2D, Detection3D, DetectionRecord, Scene, SceneObject
from simpb_desk.exceptions import DataError

from .conftest import front_camera


def make_scene(ys=(-3.0, 0.0, 3.0), classes=None, scene_id="s0") -> Scene:
    rig = [front_camera()]
    classes = classes or [0] * len(ys)
    objects = [
        SceneObject(object_id=i, class_id=c, anchor=Anchor3D(x=10.0, y=y, z=1.5, w=1.0, l=1.0, h=1.0))
        for i, (y, c) in enumerate(zip(ys, classes))
    ]
    return Scene(scene_id=scene_id, rig=rig, objects=objects, ground_truth_2d=derive_ground_truth(objects, rig))


def det3d(i: int, obj: SceneObject, score: float = 0.9, dx: float = 0.0, class_id: int | None = None) -> Detection3D:
    anchor = obj.anchor.as_array().copy()
    anchor[0] += dx
    return Detection3D(
        id=i, anchor=tuple(float(a) for a in anchor), class_id=obj.class_id if class_id is None else class_id, score=score
    )


def det2d(j: int, box: Box2D, linked: int, camera: int = 0, score: float = 0.9, class_id: int = 0) -> Detection2D:
    return Detection2D(
        id=j, camera=camera, cx=box.cx, cy=box.cy, w=box.w, h=box.h, class_id=class_id, score=score, linked_3d_id=linked
    )


def perfect_record(scene: Scene, score: float = 0.9) -> DetectionRecord:
    index = {obj.object_id: i for i, obj in enumerate(scene.objects)}
    return DetectionRecord(
        scene_id=scene.scene_id,
        detections_3d=[det3d(i, obj, score) for i, obj in enumerate(scene.objects)],
        detections_2d=[
            det2d(j, g.box, index[g.object_id], g.camera, score, scene.object_by_id(g.object_id).class_id)
            for j, g in enumerate(scene.ground_truth_2d)
        ],
    )


class TestAveragePrecision:
    def test_interpolation(self):
        recall = np.array([0.5, 0.5, 1.0])
        precision = np.array([1.0, 0.5, 2.0 / 3.0])
        assert every_point_interpolation(recall, precision) == pytest.approx(5.0 / 6.0)

    def test_tp_fp_tp(self):
        scene = make_scene(ys=(-3.0, 3.0))
        g0, g1 = (g.box for g in scene.ground_truth_2d)
        record = DetectionRecord(
            scene_id=scene.scene_id,
            detections_2d=[
                det2d(0, g0, 0, score=0.9),
                det2d(1, Box2D(cx=5.0, cy=5.0, w=4.0, h=4.0), 1, score=0.8),
                det2d(2, g1, 2, score=0.7),
            ],
        )
        result = average_precision_2d([record], [scene])
        assert result.per_class[0] == pytest.approx(0.8333, abs=1e-4)
        assert [p.recall for p in result.pr_points] == pytest.approx([0.5, 0.5, 1.0])

    def test_perfect_detections(self):
        scene = make_scene()
        result = average_precision_2d([perfect_record(scene)], [scene], iou_threshold=0.75)
        assert result.per_class == {0: pytest.approx(1.0)}
        assert result.mean == pytest.approx(1.0)

    def test_duplicate_is_a_false_positive(self):
        scene = make_scene(ys=(0.0,))
        g = scene.ground_truth_2d[0].box
        record = DetectionRecord(
            scene_id=scene.scene_id, detections_2d=[det2d(0, g, 0, score=0.9), det2d(1, g, 1, score=0.8)]
        )
        points = average_precision_2d([record], [scene]).pr_points
        assert [p.precision for p in points] == pytest.approx([1.0, 0.5])

    def test_classes_without_ground_truth_are_skipped(self):
        scene = make_scene(ys=(0.0, 3.0), classes=[0, 0])
        record = DetectionRecord(
            scene_id=scene.scene_id, detections_2d=[det2d(0, scene.ground_truth_2d[0].box, 0, class_id=1)]
        )
        result = average_precision_2d([record], [scene])
        assert result.per_class == {0: 0.0}
        assert result.mean == 0.0

    def test_no_ground_truth_at_all(self):
        scene = make_scene(ys=())
        assert average_precision_2d([], [scene]).mean is None


class TestCenterError:
    def test_constant_offset(self):
        scene = make_scene()
        record = DetectionRecord(
            scene_id=scene.scene_id, detections_3d=[det3d(i, o, dx=0.3) for i, o in enumerate(scene.objects)]
        )
        summary = center_error_3d([record], [scene])
        assert summary.matched == summary.num_gt == 3
        assert summary.mean == pytest.approx(0.3)
        assert summary.median == pytest.approx(0.3)
        assert summary.mean_yaw_error == pytest.approx(0.0)

    def test_outside_gate(self):
        scene = make_scene(ys=(0.0,))
        record = DetectionRecord(scene_id=scene.scene_id, detections_3d=[det3d(0, scene.objects[0], dx=2.5)])
        summary = center_error_3d([record], [scene])
        assert summary.matched == 0 and summary.num_gt == 1
        assert summary.mean is None and summary.mean_yaw_error is None

    def test_yaw_error_wraps(self):
        obj = SceneObject(object_id=0, class_id=0, anchor=Anchor3D(x=10, y=0, z=1, w=1, l=1, h=1, yaw=-math.pi + 0.1))
        scene = Scene(scene_id="s", rig=[front_camera()], objects=[obj])
        anchor = obj.anchor.as_array().copy()
        anchor[6] = math.pi - 0.1
        record = DetectionRecord(
            scene_id="s", detections_3d=[Detection3D(id=0, anchor=tuple(anchor), class_id=0, score=1.0)]
        )
        assert center_error_3d([record], [scene]).mean_yaw_error == pytest.approx(0.2)

    def test_score_threshold(self):
        scene = make_scene(ys=(0.0,))
        record = DetectionRecord(scene_id=scene.scene_id, detections_3d=[det3d(0, scene.objects[0], score=0.2)])
        assert center_error_3d([record], [scene], score_threshold=0.3).matched == 0

    def test_greedy_takes_closest_first(self):
        pred = np.array([[0.0, 0, 0], [1.0, 0, 0]])
        gt = np.array([[0.9, 0, 0]])
        matches = greedy_center_matches(pred, gt)
        assert [(i, j) for i, j, _ in matches] == [(1, 0)]
        assert matches[0][2] == pytest.approx(0.1)


class TestAssociation:
    def test_predicates(self):
        scene = make_scene(ys=(0.0,))
        obj, label, cam = scene.objects[0], scene.ground_truth_2d[0], scene.rig[0]
        params = MatchPredicateParams()
        good = det3d(0, obj)
        assert phi(good, label, obj, cam, params) == 1
        assert phi(det3d(0, obj, class_id=1), label, obj, cam, params) == 0
        assert phi(det3d(0, obj, dx=2.5), label, obj, cam, params) == 0
        linked = det2d(0, label.box, 0)
        assert psi(good, linked, label, obj, cam, params) == 1
        assert psi(good, None, label, obj, cam, params) == 0
        assert psi(good, det2d(0, Box2D(cx=5, cy=5, w=2, h=2), 0), label, obj, cam, params) == 0

    def test_perfect_association(self):
        scene = make_scene()
        report = aar_recall([perfect_record(scene)], [scene])
        assert report.matching == report.valid_matching == 3
        assert report.aar == pytest.approx(100.0)
        assert report.recall == pytest.approx(100.0)
        assert [p.tau_iou for p in report.curve] == pytest.approx([0.1 * i for i in range(1, 10)])

    def test_one_wrong_link(self):
        scene = make_scene()
        boxes = [g.box for g in scene.ground_truth_2d]
        record = DetectionRecord(
            scene_id=scene.scene_id,
            detections_3d=[det3d(i, o) for i, o in enumerate(scene.objects)],
            detections_2d=[det2d(0, boxes[0], 0), det2d(1, boxes[1], 1), det2d(2, boxes[0], 2)],
        )
        report = aar_recall([record], [scene])
        assert report.matching == 3 and report.valid_matching == 2
        assert report.aar == pytest.approx(66.67, abs=0.01)
        assert report.recall == pytest.approx(66.67, abs=0.01)

    def test_shuffled_links(self):
        scene = make_scene()
        boxes = [g.box for g in scene.ground_truth_2d]
        record = DetectionRecord(
            scene_id=scene.scene_id,
            detections_3d=[det3d(i, o) for i, o in enumerate(scene.objects)],
            detections_2d=[det2d(j, boxes[j], (j + 1) % 3) for j in range(3)],
        )
        report = aar_recall([record], [scene])
        assert report.matching == 3
        assert report.aar == 0.0

    def test_no_candidates(self):
        scene = make_scene()
        record = DetectionRecord(
            scene_id=scene.scene_id, detections_3d=[det3d(i, o, class_id=1) for i, o in enumerate(scene.objects)]
        )
        report = aar_recall([record], [scene])
        assert report.aar is None
        assert report.recall == 0.0
        assert report.num_gt_2d == 3

    def test_score_threshold_removes_detections(self):
        scene = make_scene()
        report = aar_recall([perfect_record(scene, score=0.2)], [scene], score_threshold=0.3)
        assert report.matching == 0 and report.aar is None

    def test_counts_and_recall_do_not_grow_with_tau(self, rng):
        scene = make_scene()
        jittered = [
            Box2D(cx=g.box.cx + rng.normal(0, 2), cy=g.box.cy + rng.normal(0, 2), w=g.box.w, h=g.box.h)
            for g in scene.ground_truth_2d
        ]
        record = DetectionRecord(
            scene_id=scene.scene_id,
            detections_3d=[det3d(i, o, dx=rng.normal(0, 0.3)) for i, o in enumerate(scene.objects)],
            detections_2d=[det2d(j, box, j) for j, box in enumerate(jittered)],
        )
        curve = aar_recall([record], [scene]).curve
        for a, b in zip(curve, curve[1:]):
            assert a.recall >= b.recall
            assert a.matching >= b.matching and a.valid_matching >= b.valid_matching
        assert all(p.valid_matching <= p.matching for p in curve)

    def test_aar_sweep_with_exact_3d_boxes(self):
        # linked 2D boxes slide sideways to IoU 0.75, 0.45 and 0.15 against their labels
        scene = make_scene()
        shifted = []
        for g, iou in zip(scene.ground_truth_2d, (0.75, 0.45, 0.15)):
            shift = g.box.w * (1.0 - iou) / (1.0 + iou)
            shifted.append(Box2D(cx=g.box.cx + shift, cy=g.box.cy, w=g.box.w, h=g.box.h))
        record = DetectionRecord(
            scene_id=scene.scene_id,
            detections_3d=[det3d(i, o) for i, o in enumerate(scene.objects)],
            detections_2d=[det2d(j, box, j) for j, box in enumerate(shifted)],
        )
        curve = aar_recall([record], [scene]).curve
        assert [p.matching for p in curve] == [3] * 9
        assert [p.valid_matching for p in curve] == [3, 2, 2, 2, 1, 1, 1, 0, 0]
        aar = [p.aar for p in curve]
        assert all(a >= b for a, b in zip(aar, aar[1:]))
        assert aar[0] == pytest.approx(100.0) and aar[-1] == 0.0
        assert [p.recall for p in curve] == pytest.approx(aar)

    def test_psi_implies_phi(self, rng, small_scene_config):
        taus = [0.1, 0.3, 0.5, 0.7, 0.9]
        for scene in generate_scenes(17, 5, small_scene_config):
            for g2d in scene.ground_truth_2d:
                obj, cam = scene.object_by_id(g2d.object_id), scene.rig[g2d.camera]
                for _ in range(10):
                    p3d = det3d(0, obj, dx=rng.normal(0, 1.0), class_id=int(rng.integers(2)))
                    box = Box2D(
                        cx=g2d.box.cx + rng.normal(0, 3),
                        cy=g2d.box.cy + rng.normal(0, 3),
                        w=g2d.box.w * rng.uniform(0.5, 1.5),
                        h=g2d.box.h,
                    )
                    p2d = det2d(0, box, 0, g2d.camera, class_id=int(rng.integers(2)))
                    for tau in taus:
                        params = MatchPredicateParams(tau_iou=tau)
                        if psi(p3d, p2d, g2d, obj, cam, params):
                            assert phi(p3d, g2d, obj, cam, params) == 1

    def test_generated_scenes_with_oracle_detections(self, small_scene_config):
        scenes = generate_scenes(3, 4, small_scene_config)
        report = aar_recall([perfect_record(s) for s in scenes], scenes)
        assert report.num_gt_2d == sum(len(s.ground_truth_2d) for s in scenes)
        assert report.valid_matching == report.num_gt_2d
        assert report.aar == pytest.approx(100.0)


class TestRecords:
    def test_missing_scene_gets_empty_record(self):
        scenes = [make_scene(scene_id="a"), make_scene(scene_id="b")]
        pairs = pair_records([perfect_record(scenes[1])], scenes)
        assert [r.scene_id for r, _ in pairs] == ["a", "b"]
        assert pairs[0][0].detections_3d == []

    def test_unknown_scene(self):
        with pytest.raises(DataError):
            pair_records([DetectionRecord(scene_id="zzz")], [make_scene()])

    def test_duplicate_records(self):
        scene = make_scene()
        with pytest.raises(DataError):
            pair_records([DetectionRecord(scene_id=scene.scene_id)] * 2, [scene])


def test_report_renders():
    scene = make_scene()
    report = evaluate_detections([perfect_record(scene)], [scene])
    assert report.ap50.mean == pytest.approx(1.0)
    assert report.center_error.mean == pytest.approx(0.0)
    assert report.association.aar == pytest.approx(100.0)
    buffer = io.StringIO()
    render_report(report, Console(file=buffer, width=120))
    text = buffer.getvalue()
    assert "AP@0.5" in text
    assert "Association" in text
