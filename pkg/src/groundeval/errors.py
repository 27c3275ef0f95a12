from __future__ import annotations

from typing import Optional


class ValidationError(ValueError):
    """A record failed validation; carries where the problem was found."""

    def __init__(self, message: str, scene_id: Optional[str] = None, ann_id=None,
                 field: Optional[str] = None, line: Optional[int] = None, path: Optional[str] = None):
        self.scene_id = scene_id
        self.ann_id = ann_id
        self.field = field
        self.line = line
        self.path = path
        super().__init__(message)

    def coordinates(self) -> str:
        parts = []
        if self.path is not None:
            parts.append(f"{self.path}:{self.line}" if self.line is not None else str(self.path))
        if self.scene_id is not None:
            parts.append(f"scene_id={self.scene_id}")
        if self.ann_id is not None:
            parts.append(f"ann_id={self.ann_id}")
        if self.field is not None:
            parts.append(f"field={self.field}")
        return " ".join(parts)

    def __str__(self) -> str:
        where = self.coordinates()
        msg = self.args[0] if self.args else ""
        return f"{where}: {msg}" if where else msg
