"""
Defining all assumptions as constants.
Importable with no side effects beyond basic validation.
Published defaults live here; run-time overrides go through TrainConfig.
"""

import math

# Frame I/O
FRAME_PATTERN = "{:06d}.png"
SUPPORTED_RESOLUTIONS = (64, 128, 256)
MAX_PIXEL_VALUE = 255

# Dataset splits (frames)
TRAIN_FRAMES = 7500
VAL_FRAMES = 2500
TRAIN_SIZE_STUDY = (7500, 5000, 2500)

# Fallback split fractions for sequences shorter than TRAIN_FRAMES + VAL_FRAMES
SHORT_TRAIN_FRACTION = 0.70
SHORT_VAL_FRACTION = 0.85

# Window
WINDOW_SIZE = 11

# Generator (U-Net)
LEVEL_CHANNELS = (64, 128, 256, 512, 512, 512, 512)
KERNEL_SIZE = 4
STRIDE = 2
INNERMOST_RESOLUTION = 2
LEAKY_SLOPE = 0.2
INIT_STD = 0.02

# Discriminator (temporal patch classifier)
DISC_DEPTH = 4
DISC_BASE_CHANNELS = 64
DISC_MAX_CHANNELS = 512

# Loss weights
LAMBDA_CONTENT = 10.0
LAMBDA_PERCEPTUAL = 0.0025

# Perceptual feature extractor
TAP_LAYERS = (1, 6, 11, 18, 25)
FACE_FEATURES = "face_features"
GENERIC_FEATURES = "generic_features"
EXTRACTOR_WIDTHS = {
    FACE_FEATURES: (16, 32, 64, 128, 128),
    GENERIC_FEATURES: (8, 16, 32, 64, 64),
}
EXTRACTOR_SEEDS = {
    FACE_FEATURES: 1,
    GENERIC_FEATURES: 2,
}

# Optimisation
LEARNING_RATE = 0.0002
BETA1 = 0.5
BETA2 = 0.999
BATCH_SIZE = 12
EPOCHS = 100

# Conditioning modes
NEUTRAL_HEAD = "neutral_head"
LANDMARKS = "landmarks"
CONTOURS = "contours"
NO_CONDITIONING = "none"

CONDITIONING_MODES = (
    NEUTRAL_HEAD,
    LANDMARKS,
    CONTOURS,
    NO_CONDITIONING,
)

LANDMARK_COUNT = 68
LANDMARK_DOT_SIZE = 3

# Ablation modes
ABLATION_MODES = (
    "no_pose_cond",
    "pose_cond_no_ego_bg_removal",
    "no_perceptual",
    "extractor_swap",
    "landmarks_cond",
    "contours_cond",
    "train_size_5000",
    "train_size_2500",
    "single_frame_no_cond",
)

# Synthetic capture rig
FISHEYE_FOV_DIAGONAL = math.pi
EGO_OCCLUSION = 0.4
FRONT_CAMERA_DISTANCE = 4.0
FRONT_FOCAL_FACTOR = 1.6  # focal length in units of image width
MAX_STATE_DELTA = 0.25
MAX_POSE_DELTA = 0.05
MAX_ANGLE = math.pi / 2
SCENE_BOUNDS = (0.5, 0.5, 0.5)  # |tx|, |ty|, |tz|
BACKGROUNDS = ("black", "textured")

# Synchronisation
SYNC_THRESHOLD = 0.8
SYNC_MEDIAN_RATIO = 3.0

# Evaluation
MAX_PHOTOMETRIC_ERROR = math.sqrt(3.0) * MAX_PIXEL_VALUE
REALTIME_BUDGET_MS = 40.0
BENCH_RESOLUTIONS = (128, 256)
BENCH_REPEATS = 5
BENCH_SEQUENCES = 3
BENCH_MIN_FRAMES = 50

# Inference frame selection
SELECT_LAST = "last"
SELECT_MIDDLE = "middle"

# Checkpoint / manifest format
CHECKPOINT_VERSION = 1
MANIFEST_VERSION = 1

# Environment overrides
ENV_DATA_ROOT = "EGOFRONT_DATA_ROOT"
ENV_DEVICE = "EGOFRONT_DEVICE"


# Lightweight validation
if len(LEVEL_CHANNELS) != 7:
    raise ValueError(f"LEVEL_CHANNELS must describe seven levels, got {len(LEVEL_CHANNELS)}")

for res in SUPPORTED_RESOLUTIONS:
    if res & (res - 1):
        raise ValueError(f"Supported resolution {res} must be a power of two")

if set(EXTRACTOR_WIDTHS) != set(EXTRACTOR_SEEDS):
    raise KeyError("EXTRACTOR_WIDTHS and EXTRACTOR_SEEDS must name the same extractors")

for name, widths in EXTRACTOR_WIDTHS.items():
    if len(widths) != len(TAP_LAYERS):
        raise ValueError(f"Extractor {name}: needs one width per tap stage, got {len(widths)}")

for name, value in (("LAMBDA_CONTENT", LAMBDA_CONTENT), ("LAMBDA_PERCEPTUAL", LAMBDA_PERCEPTUAL)):
    if value < 0.0:
        raise ValueError(f"{name} must be non-negative, got {value}")

if not (0.0 < FISHEYE_FOV_DIAGONAL <= math.pi):
    raise ValueError(f"FISHEYE_FOV_DIAGONAL must be in (0, pi], got {FISHEYE_FOV_DIAGONAL}")

if not (0.0 <= EGO_OCCLUSION < 0.5):
    raise ValueError(f"EGO_OCCLUSION must be in [0, 0.5) so the mouth stays in view, got {EGO_OCCLUSION}")

if not (0.0 < SYNC_THRESHOLD < 1.0):
    raise ValueError(f"SYNC_THRESHOLD must be in (0,1), got {SYNC_THRESHOLD}")

if not (0.0 < SHORT_TRAIN_FRACTION < SHORT_VAL_FRACTION < 1.0):
    raise ValueError("Short-sequence split fractions must be ordered inside (0,1)")
