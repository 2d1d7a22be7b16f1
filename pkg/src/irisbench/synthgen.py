"""Procedural synthetic eye images with exact labels.

Each identity owns an iris texture defined in normalized polar coordinates
(radius from pupil to limbus in [0, 1], angle in [0, 2*pi)); samples of the
same identity differ in gaze, pupil dilation, slight texture rotation and
radial warping, illumination and sensor noise.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidParameter
from .imagecore import load_image, load_labels, sample_bilinear, save_image, save_labels
from .segmentation import IRIS, PUPIL, SCLERA, SKIN, IrisAnnulus

WIDTH, HEIGHT = 320, 240
EYE_CENTER = (WIDTH / 2.0, HEIGHT / 2.0)
SCLERA_AXES = (125.0, 80.0)
MAX_GAZE_DEG = 30.0
# eyeball rotation radius and corneal glint displacement, both in units of iris radius
EYEBALL_RADIUS = 2.2
GLINT_FOLLOW = 0.6
GLINT_PATTERNS = {
    1: [(0.0, 0.25)],
    2: [(-0.28, 0.22), (0.28, 0.22)],
    3: [(-0.28, 0.22), (0.28, 0.22), (0.0, -0.25)],
}
GLINT_PEAK = 0.97
GLINT_SIGMA = 1.6
PUPIL_LEVEL = 0.06
IRIS_RANGE = (0.18, 0.8)

TEX_R, TEX_T = 96, 768
OCTAVES = [((2, 8), 1.0), ((4, 16), 0.9), ((6, 32), 0.8), ((10, 64), 0.7), ((16, 128), 0.55)]
# identity-level texture statistics (what a style classifier can key on)
CONTRAST_RANGE = (0.05, 0.2)
SLOPE_RANGE = (-0.6, 0.6)
BAND_RANGE = (0.0, 0.09)


@dataclass(frozen=True)
class IdentitySpec:
    identity_id: int
    texture_seed: int
    iris_radius_base: float
    pigmentation: float


@dataclass
class EyeSample:
    image: np.ndarray
    mask: np.ndarray
    glints: np.ndarray
    gaze_label: np.ndarray
    annulus_truth: IrisAnnulus
    identity_id: int
    sample_id: int = 0
    split: str = "enroll"
    jitter_seed: int = 0
    glint_positions: list = field(default_factory=list)


def gaze_from_angles(yaw_deg: float, pitch_deg: float) -> np.ndarray:
    y, p = math.radians(yaw_deg), math.radians(pitch_deg)
    return np.array([math.cos(p) * math.sin(y), math.sin(p), math.cos(p) * math.cos(y)])


def angles_from_gaze(g) -> tuple[float, float]:
    """(yaw, pitch) in radians."""
    g = np.asarray(g, dtype=np.float64)
    return math.atan2(g[0], g[2]), math.asin(max(-1.0, min(1.0, g[1])))


def _value_noise(rng, nr: int, nt: int) -> np.ndarray:
    """Smooth random field on the TEX_R x TEX_T polar grid, periodic in angle."""
    grid = rng.standard_normal((nr + 1, nt))
    r = np.linspace(0.0, nr, TEX_R)
    t = np.arange(TEX_T) * (nt / TEX_T)
    r0 = np.minimum(np.floor(r).astype(int), nr - 1)
    t0 = np.floor(t).astype(int)
    fr = r - r0
    ft = t - t0
    fr = fr * fr * (3 - 2 * fr)
    ft = ft * ft * (3 - 2 * ft)
    t1 = (t0 + 1) % nt
    a = grid[r0][:, t0] * (1 - ft) + grid[r0][:, t1] * ft
    b = grid[r0 + 1][:, t0] * (1 - ft) + grid[r0 + 1][:, t1] * ft
    return a * (1 - fr[:, None]) + b * fr[:, None]


def iris_texture(identity: IdentitySpec) -> np.ndarray:
    """Identity texture on a (TEX_R, TEX_T) polar grid; rows run pupil -> limbus."""
    rng = np.random.default_rng(identity.texture_seed)
    # per-identity texture statistics: contrast, fine-vs-coarse balance, furrow strength
    contrast = rng.uniform(*CONTRAST_RANGE)
    slope = rng.uniform(*SLOPE_RANGE)
    band_amp = rng.uniform(*BAND_RANGE)
    tex = np.zeros((TEX_R, TEX_T))
    for k, ((nr, nt), amp) in enumerate(OCTAVES):
        tex += amp * math.exp(slope * (k - 2)) * _value_noise(rng, nr, nt)
    tex /= tex.std()

    rho = np.linspace(0.0, 1.0, TEX_R)[:, None]
    n_bands = rng.uniform(5.0, 8.0)
    wobble = _value_noise(rng, 1, 24)
    bands = np.cos(2 * math.pi * (n_bands * rho + 0.35 * wobble))
    collarette = 0.3 + 0.08 * _value_noise(rng, 1, 12)[0]
    ridge = np.exp(-(((rho - collarette[None, :]) / 0.05) ** 2))
    limbal = np.clip((rho - 0.82) / 0.18, 0.0, 1.0) ** 2

    val = identity.pigmentation + contrast * tex + band_amp * bands + 0.06 * ridge - 0.14 * limbal
    return np.clip(val, *IRIS_RANGE)


def _smooth_field(rng, shape, cells: int) -> np.ndarray:
    h, w = shape
    gh, gw = cells + 1, int(cells * w / h) + 1
    grid = rng.standard_normal((gh + 1, gw + 1))
    ys = np.linspace(0, gh - 1, h)
    xs = np.linspace(0, gw - 1, w)
    gx, gy = np.meshgrid(xs, ys)
    return sample_bilinear(grid, gx, gy)


def render_eye(
    identity: IdentitySpec,
    gaze,
    pose_jitter_seed: int,
    n_glints: int = 2,
    texture: np.ndarray | None = None,
) -> EyeSample:
    gaze = np.asarray(gaze, dtype=np.float64)
    if gaze.shape != (3,) or abs(np.linalg.norm(gaze) - 1.0) > 1e-6:
        raise InvalidParameter("gaze must be a unit 3-vector")
    if math.degrees(math.acos(max(-1.0, min(1.0, gaze[2])))) > MAX_GAZE_DEG + 1e-9:
        raise InvalidParameter(f"gaze is more than {MAX_GAZE_DEG} degrees off the optical axis")
    if n_glints not in GLINT_PATTERNS:
        raise InvalidParameter("n_glints must be 1, 2 or 3")
    if texture is None:
        texture = iris_texture(identity)

    rng = np.random.default_rng(pose_jitter_seed)
    slip = rng.uniform(-0.5, 0.5, size=2)
    iris_r = identity.iris_radius_base + rng.uniform(-1.0, 1.0)
    pupil_r = iris_r * rng.uniform(0.32, 0.45)
    rot = math.radians(rng.uniform(-5.0, 5.0))
    warp = rng.uniform(0.9, 1.1)
    gain = rng.uniform(0.98, 1.02)
    offset = rng.uniform(-0.01, 0.01)

    eye_r = EYEBALL_RADIUS * identity.iris_radius_base
    shift = np.array([eye_r * gaze[0], -eye_r * gaze[1]])
    base = np.array(EYE_CENTER) + slip
    cx, cy = base + shift

    yy, xx = np.mgrid[0:HEIGHT, 0:WIDTH].astype(np.float64)
    dx, dy = xx - cx, yy - cy
    dist = np.hypot(dx, dy)
    in_pupil = dist < pupil_r
    in_iris = (dist < iris_r) & ~in_pupil
    ex = (xx - base[0]) / SCLERA_AXES[0]
    ey = (yy - base[1]) / SCLERA_AXES[1]
    in_sclera = (ex * ex + ey * ey < 1.0) & ~(in_iris | in_pupil)

    img = 0.58 + 0.04 * _smooth_field(rng, (HEIGHT, WIDTH), 4)
    scl = 0.84 - 0.08 * (ex * ex + ey * ey) + 0.015 * _smooth_field(rng, (HEIGHT, WIDTH), 6)
    img = np.where(in_sclera, scl, img)

    rho = np.clip((dist[in_iris] - pupil_r) / (iris_r - pupil_r), 0.0, 1.0) ** warp
    ang = (np.arctan2(dy[in_iris], dx[in_iris]) - rot) % (2 * math.pi)
    tex_wrapped = np.concatenate([texture, texture[:, :1]], axis=1)
    img[in_iris] = sample_bilinear(tex_wrapped, ang * (TEX_T / (2 * math.pi)), rho * (TEX_R - 1))
    img[in_pupil] = PUPIL_LEVEL

    img = img * gain + offset
    img = img + rng.normal(0.0, 0.012, size=img.shape)

    glint_layer = np.zeros_like(img)
    glint_pos = []
    for ox, oy in GLINT_PATTERNS[n_glints]:
        gx = base[0] + GLINT_FOLLOW * shift[0] + ox * iris_r
        gy = base[1] + GLINT_FOLLOW * shift[1] + oy * iris_r
        glint_pos.append((float(gx), float(gy)))
        r2 = (xx - gx) ** 2 + (yy - gy) ** 2
        blob = np.minimum(GLINT_PEAK, 1.4 * GLINT_PEAK * np.exp(-r2 / (2 * GLINT_SIGMA**2)))
        glint_layer = np.maximum(glint_layer, blob)
    img = np.clip(img, 0.0, 0.88)
    img = np.maximum(img, glint_layer)

    mask = np.full((HEIGHT, WIDTH), SKIN, dtype=np.uint8)
    mask[in_sclera] = SCLERA
    mask[in_iris] = IRIS
    mask[in_pupil] = PUPIL
    glints = glint_layer >= 0.9

    annulus = IrisAnnulus((float(cx), float(cy)), float(pupil_r), (float(cx), float(cy)), float(iris_r))
    return EyeSample(
        image=img,
        mask=mask,
        glints=glints,
        gaze_label=gaze,
        annulus_truth=annulus,
        identity_id=identity.identity_id,
        jitter_seed=pose_jitter_seed,
        glint_positions=sorted(glint_pos),
    )


def make_identities(n_identities: int, master_seed: int) -> list[IdentitySpec]:
    ss = np.random.SeedSequence(master_seed)
    rng = np.random.default_rng(ss.spawn(1)[0])
    seeds = ss.spawn(n_identities + 1)[1:]
    out = []
    for i, s in enumerate(seeds):
        out.append(
            IdentitySpec(
                identity_id=i,
                texture_seed=int(s.generate_state(1, np.uint64)[0]),
                iris_radius_base=float(rng.uniform(38.0, 46.0)),
                pigmentation=float(rng.uniform(0.3, 0.52)),
            )
        )
    return out


@dataclass
class Dataset:
    samples: list[EyeSample]
    identities: list[IdentitySpec]
    master_seed: int | None = None

    def split(self, name: str) -> list[EyeSample]:
        return [s for s in self.samples if s.split == name]

    @property
    def enroll(self):
        return self.split("enroll")

    @property
    def probe(self):
        return self.split("probe")


def generate_dataset(
    n_identities: int = 20,
    samples_per_identity: int = 10,
    master_seed: int = 2024,
    max_yaw: float = 20.0,
    max_pitch: float = 15.0,
) -> Dataset:
    if n_identities < 2:
        raise InvalidParameter("need at least 2 identities (impersonation needs a donor)")
    if samples_per_identity < 1:
        raise InvalidParameter("need at least one sample per identity")
    identities = make_identities(n_identities, master_seed)
    ss = np.random.SeedSequence([master_seed, 1])
    gaze_rng = np.random.default_rng(ss.spawn(1)[0])
    n_enroll = max(1, samples_per_identity // 2) if samples_per_identity > 1 else 1
    samples = []
    sid = 0
    for ident in identities:
        tex = iris_texture(ident)
        for k in range(samples_per_identity):
            yaw = gaze_rng.uniform(-max_yaw, max_yaw)
            pitch = gaze_rng.uniform(-max_pitch, max_pitch)
            jitter = int(gaze_rng.integers(0, 2**63 - 1))
            s = render_eye(ident, gaze_from_angles(yaw, pitch), jitter, texture=tex)
            s.sample_id = sid
            s.split = "enroll" if k < n_enroll else "probe"
            samples.append(s)
            sid += 1
    return Dataset(samples, identities, master_seed)


MANIFEST_COLUMNS = [
    "id", "identity_id", "split", "gaze_x", "gaze_y", "gaze_z",
    "pupil_cx", "pupil_cy", "pupil_r", "iris_cx", "iris_cy", "iris_r",
    "texture_seed", "jitter_seed",
]


def manifest_text(ds: Dataset) -> str:
    by_id = {i.identity_id: i for i in ds.identities}
    lines = []
    if ds.master_seed is not None:
        lines.append(f"# master_seed={ds.master_seed}")
    lines.append(f"# image_size={WIDTH}x{HEIGHT}")
    for ident in ds.identities:
        lines.append(
            f"# identity {ident.identity_id} texture_seed={ident.texture_seed} "
            f"iris_radius_base={ident.iris_radius_base:.6f} pigmentation={ident.pigmentation:.6f}"
        )
    lines.append("\t".join(MANIFEST_COLUMNS))
    for s in ds.samples:
        a = s.annulus_truth
        tex_seed = by_id[s.identity_id].texture_seed if s.identity_id in by_id else 0
        row = [
            f"{s.sample_id:04d}", str(s.identity_id), s.split,
            *(f"{v:.9f}" for v in s.gaze_label),
            f"{a.pupil_center[0]:.6f}", f"{a.pupil_center[1]:.6f}", f"{a.pupil_radius:.6f}",
            f"{a.iris_center[0]:.6f}", f"{a.iris_center[1]:.6f}", f"{a.iris_radius:.6f}",
            str(tex_seed), str(s.jitter_seed),
        ]
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def manifest_hash(ds: Dataset) -> str:
    return hashlib.sha256(manifest_text(ds).encode()).hexdigest()


def write_dataset(ds: Dataset, out_dir) -> Path:
    out = Path(out_dir)
    for sub in ("img", "mask", "glint"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    for s in ds.samples:
        name = f"{s.sample_id:04d}.png"
        save_image(s.image, out / "img" / name)
        save_labels(s.mask, out / "mask" / name)
        save_labels(s.glints.astype(np.uint8) * 255, out / "glint" / name)
    (out / "manifest.tsv").write_text(manifest_text(ds))
    return out


def load_dataset(path) -> Dataset:
    """Load any directory in the img/mask/glint/manifest.tsv layout."""
    root = Path(path)
    manifest = root / "manifest.tsv"
    if not manifest.is_file():
        raise FileNotFoundError(f"no manifest.tsv in {root}")
    master_seed = None
    header = None
    samples = []
    identities = {}
    for line in manifest.read_text().splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("master_seed="):
                master_seed = int(body.split("=", 1)[1])
            elif body.startswith("identity "):
                parts = body.split()
                kv = dict(p.split("=", 1) for p in parts[2:])
                iid = int(parts[1])
                identities[iid] = IdentitySpec(
                    iid, int(kv["texture_seed"]), float(kv["iris_radius_base"]), float(kv["pigmentation"])
                )
            continue
        if header is None:
            header = line.split("\t")
            continue
        rec = dict(zip(header, line.split("\t")))
        name = f"{rec['id']}.png"
        gaze = np.array([float(rec["gaze_x"]), float(rec["gaze_y"]), float(rec["gaze_z"])])
        annulus = IrisAnnulus(
            (float(rec["pupil_cx"]), float(rec["pupil_cy"])), float(rec["pupil_r"]),
            (float(rec["iris_cx"]), float(rec["iris_cy"])), float(rec["iris_r"]),
        )
        samples.append(
            EyeSample(
                image=load_image(root / "img" / name),
                mask=load_labels(root / "mask" / name),
                glints=load_labels(root / "glint" / name) > 127,
                gaze_label=gaze / np.linalg.norm(gaze),
                annulus_truth=annulus,
                identity_id=int(rec["identity_id"]),
                sample_id=int(rec["id"]),
                split=rec.get("split", "enroll"),
                jitter_seed=int(rec.get("jitter_seed", 0)),
            )
        )
    return Dataset(samples, [identities[k] for k in sorted(identities)], master_seed)
