"""Sample schema and the JSON-Lines sample store."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..canvas.raster import read_ppm, write_ppm
from ..canvas.types import AuxiliaryImage, ReasoningBlock


class SampleError(ValueError):
    pass


@dataclass
class ReasoningSample:
    id: str
    question: str
    problem_image: AuxiliaryImage
    trace: list[ReasoningBlock]
    aux_images: list[AuxiliaryImage]
    answer: str
    meta: dict = field(default_factory=dict)

    def validate(self):
        if not self.answer or not self.answer.strip():
            raise SampleError(f"{self.id}: empty answer")
        for b in self.trace:
            if b.image_ref is not None and not 0 <= b.image_ref < len(self.aux_images):
                raise SampleError(f"{self.id}: trace references missing aux image {b.image_ref}")
            if b.kind == "joint" and b.image_ref is None:
                raise SampleError(f"{self.id}: joint block without image_ref")
        return self


def write_samples(path, samples) -> Path:
    """Write ``samples.jsonl`` with rasters as PPM files next to it."""
    path = Path(path)
    img_dir = path.parent / (path.stem + "_images")
    img_dir.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        for s in samples:
            s.validate()
            prob = img_dir / f"{s.id}.problem.ppm"
            write_ppm(prob, s.problem_image.pixels)
            aux_paths = []
            for j, a in enumerate(s.aux_images):
                ap = img_dir / f"{s.id}.aux{j}.ppm"
                write_ppm(ap, a.pixels)
                aux_paths.append(str(ap.relative_to(path.parent)))
            rec = {"id": s.id, "question": s.question, "answer": s.answer,
                   "problem_image": str(prob.relative_to(path.parent)), "aux_images": aux_paths,
                   "trace": [b.to_dict() for b in s.trace], "meta": s.meta}
            fh.write(json.dumps(rec) + "\n")
    tmp.replace(path)
    return path


def read_samples(path) -> list[ReasoningSample]:
    path = Path(path)
    out = []
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                s = ReasoningSample(
                    id=rec["id"], question=rec["question"],
                    problem_image=AuxiliaryImage(read_ppm(path.parent / rec["problem_image"])),
                    trace=[ReasoningBlock.from_dict(b) for b in rec["trace"]],
                    aux_images=[AuxiliaryImage(read_ppm(path.parent / a)) for a in rec["aux_images"]],
                    answer=rec["answer"], meta=rec.get("meta", {}))
            except (KeyError, json.JSONDecodeError, OSError) as e:
                raise SampleError(f"{path}:{n}: {e}") from e
            out.append(s.validate())
    return out
