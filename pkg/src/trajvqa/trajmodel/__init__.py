from trajvqa.trajmodel.manifest import (
    ManifestError,
    check_media,
    dumps_manifest,
    load_manifest,
    read_pfm,
    record_from_dict,
    record_to_dict,
    write_manifest,
    write_pfm,
)
from trajvqa.trajmodel.model import (
    CameraRig,
    FrameObservation,
    GripperRange,
    StereoPartner,
    TargetObject,
    TrajectoryRecord,
    normalize_aperture,
)

__all__ = [
    "CameraRig",
    "FrameObservation",
    "GripperRange",
    "ManifestError",
    "StereoPartner",
    "TargetObject",
    "TrajectoryRecord",
    "check_media",
    "dumps_manifest",
    "load_manifest",
    "normalize_aperture",
    "read_pfm",
    "record_from_dict",
    "record_to_dict",
    "write_manifest",
    "write_pfm",
]
