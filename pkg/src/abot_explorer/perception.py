"""Simulated egocentric perception.

A camera rig carried by the agent reports ground-truth landmarks and
objects that are within range, inside some camera frustum, and in line of
sight over the occupancy grid. Landmarks come back as pixel detections so
downstream code has to recover their positions by ground-plane projection;
objects come back as bare category names.

The optional noise model drops detections, jitters pixels, and confuses
landmark types. All draws come from one seeded generator in a fixed order,
so a given (scene, trajectory, seed) triple always produces the same
observations.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .errors import InvalidPose
from .geometry import CameraModel, Pose, project_to_pixel, raycast_los
from .scene import Scene, SnaType, room_at

DEFAULT_RANGE_M = 5.0
DEFAULT_HFOV_RAD = math.radians(110.0)
DEFAULT_VFOV_RAD = math.radians(104.0)
DEFAULT_IMAGE_WIDTH = 720
DEFAULT_IMAGE_HEIGHT = 640
DEFAULT_MOUNT_HEIGHT_M = 0.6
DEFAULT_PITCH_RAD = math.radians(15.0)

# Types a confused detection can turn into (the true type is excluded at
# draw time). Unknown only ever appears through this path.
_CONFUSABLE = (
    SnaType.STAIRS,
    SnaType.ROOM_ENTRY,
    SnaType.INTERSECTION,
    SnaType.NORMAL,
    SnaType.UNKNOWN,
)


def default_rig() -> tuple[CameraModel, ...]:
    """Four cameras at quarter-turn offsets covering the full azimuth."""
    return tuple(
        CameraModel(
            yaw_offset=i * math.pi / 2.0,
            hfov=DEFAULT_HFOV_RAD,
            vfov=DEFAULT_VFOV_RAD,
            image_width=DEFAULT_IMAGE_WIDTH,
            image_height=DEFAULT_IMAGE_HEIGHT,
            mount_height=DEFAULT_MOUNT_HEIGHT_M,
            pitch=DEFAULT_PITCH_RAD,
        )
        for i in range(4)
    )


@dataclass(frozen=True)
class Detection:
    """One landmark sighting. source_id names the ground-truth node for
    diagnostics only; integration must not rely on it."""

    camera_index: int
    pixel: tuple[float, float]
    sna_type: SnaType
    source_id: str


@dataclass(frozen=True)
class LocalObservation:
    detections: tuple[Detection, ...]
    local_edges: tuple[tuple[int, int], ...]
    room_label: str
    visible_objects: tuple[str, ...]
    pose: Pose


def observation_to_dict(obs: LocalObservation) -> dict:
    """JSON-ready form; floats keep full precision so replays are exact."""
    return {
        "pose": {
            "x": obs.pose.x,
            "y": obs.pose.y,
            "heading": obs.pose.heading,
            "floor": obs.pose.floor,
        },
        "room": obs.room_label,
        "objects": list(obs.visible_objects),
        "detections": [
            {
                "camera": d.camera_index,
                "pixel": [d.pixel[0], d.pixel[1]],
                "type": d.sna_type.value,
                "source": d.source_id,
            }
            for d in obs.detections
        ],
        "edges": [list(e) for e in obs.local_edges],
    }


def observation_from_dict(doc: dict) -> LocalObservation:
    from .errors import SchemaError

    try:
        pose = Pose(
            float(doc["pose"]["x"]),
            float(doc["pose"]["y"]),
            float(doc["pose"]["heading"]),
            floor=int(doc["pose"]["floor"]),
        )
        detections = tuple(
            Detection(
                camera_index=int(d["camera"]),
                pixel=(float(d["pixel"][0]), float(d["pixel"][1])),
                sna_type=SnaType(d["type"]),
                source_id=str(d["source"]),
            )
            for d in doc["detections"]
        )
        edges = tuple((int(a), int(b)) for a, b in doc["edges"])
        return LocalObservation(
            detections=detections,
            local_edges=edges,
            room_label=str(doc["room"]),
            visible_objects=tuple(str(o) for o in doc["objects"]),
            pose=pose,
        )
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise SchemaError(f"bad observation record: {e}") from None


@dataclass(frozen=True)
class NoiseModel:
    pixel_sigma_px: float = 0.0
    dropout_prob: float = 0.0
    type_confusion_prob: float = 0.0

    def __post_init__(self) -> None:
        if self.pixel_sigma_px < 0.0:
            raise ValueError("pixel_sigma_px must be non-negative")
        for p in (self.dropout_prob, self.type_confusion_prob):
            if not (0.0 <= p <= 1.0):
                raise ValueError("probabilities must be in [0, 1]")

    def state(self, seed: int) -> "NoiseState":
        return NoiseState(self, random.Random(seed))


class NoiseState:
    """Noise model plus its private random stream."""

    def __init__(self, model: NoiseModel, rng: random.Random) -> None:
        self.model = model
        self.rng = rng


def observe(
    scene: Scene,
    pose: Pose,
    rig: tuple[CameraModel, ...],
    range_m: float = DEFAULT_RANGE_M,
    noise: NoiseState | None = None,
) -> LocalObservation:
    """Capture one observation at a pose.

    A landmark or object is reported iff it is within range_m of the
    agent, projects into at least one camera image, and has grid line of
    sight from the agent. A landmark seen by several cameras yields one
    detection from the camera whose image centers it best.

    Raises:
        InvalidPose: the pose is off-grid, on an occupied cell, or on a
            floor the scene does not have.
    """
    if not (0 <= pose.floor < scene.floor_count):
        raise InvalidPose(f"floor {pose.floor} out of range")
    plan = scene.floors[pose.floor]
    if not plan.grid.is_free_world(pose.x, pose.y):
        raise InvalidPose(f"pose {(pose.x, pose.y)} is not on a free cell")

    range_sq = range_m * range_m
    model = noise.model if noise is not None else None
    rng = noise.rng if noise is not None else None

    detections: list[Detection] = []
    detected_ids: dict[str, int] = {}
    for node in plan.gt_nodes:
        hit = _best_pixel(node.position, pose, rig, range_sq, plan.grid)
        if hit is None:
            continue
        cam_index, pixel = hit
        sna = node.sna_type
        if model is not None:
            if model.dropout_prob > 0.0 and rng.random() < model.dropout_prob:
                continue
            if model.pixel_sigma_px > 0.0:
                cam = rig[cam_index]
                u = pixel[0] + rng.gauss(0.0, model.pixel_sigma_px)
                v = pixel[1] + rng.gauss(0.0, model.pixel_sigma_px)
                pixel = (
                    min(max(u, 0.0), cam.image_width - 1e-6),
                    min(max(v, 0.0), cam.image_height - 1e-6),
                )
            if model.type_confusion_prob > 0.0 and rng.random() < model.type_confusion_prob:
                others = [t for t in _CONFUSABLE if t is not sna]
                sna = others[rng.randrange(len(others))]
        detected_ids[node.id] = len(detections)
        detections.append(
            Detection(
                camera_index=cam_index,
                pixel=pixel,
                sna_type=sna,
                source_id=node.id,
            )
        )

    local_edges = []
    for a, b in plan.gt_edges:
        ia = detected_ids.get(a)
        ib = detected_ids.get(b)
        if ia is not None and ib is not None:
            local_edges.append((min(ia, ib), max(ia, ib)))

    seen_categories: set[str] = set()
    for obj in plan.objects:
        if obj.category in seen_categories:
            continue
        if _best_pixel(obj.position, pose, rig, range_sq, plan.grid) is None:
            continue
        if model is not None and model.dropout_prob > 0.0:
            if rng.random() < model.dropout_prob:
                continue
        seen_categories.add(obj.category)

    return LocalObservation(
        detections=tuple(detections),
        local_edges=tuple(sorted(local_edges)),
        room_label=room_at(scene, (pose.x, pose.y), pose.floor),
        visible_objects=tuple(sorted(seen_categories)),
        pose=pose,
    )


def _best_pixel(position, pose, rig, range_sq, grid):
    dx = position[0] - pose.x
    dy = position[1] - pose.y
    if dx * dx + dy * dy > range_sq:
        return None
    best = None
    best_score = math.inf
    point = (position[0], position[1], 0.0)
    for i, cam in enumerate(rig):
        pixel = project_to_pixel(point, cam, pose)
        if pixel is None:
            continue
        du = pixel[0] - cam.image_width / 2.0
        dv = pixel[1] - cam.image_height / 2.0
        score = du * du + dv * dv
        if score < best_score:
            best_score = score
            best = (i, pixel)
    if best is None:
        return None
    if not raycast_los(grid, (pose.x, pose.y), position):
        return None
    return best
