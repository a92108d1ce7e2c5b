"""Request and response models for the HTTP service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

Impl = Literal["bdl", "b1", "b2"]
Split = Literal["object", "spatial"]
Coords = list[float]


class CreateIndex(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(pattern=r"^[A-Za-z0-9_.-]{1,64}$")
    dim: int = Field(ge=1, le=64)
    impl: Impl = "bdl"
    split: Split = "object"
    buffer_size: int = Field(default=1024, ge=1)


class IndexInfo(BaseModel):
    name: str
    dim: int
    impl: Impl
    split: Split
    live: int
    mask: int | None = None
    slot_live: list[int] | None = None
    buffer_live: int | None = None


class PointBatch(BaseModel):
    model_config = ConfigDict(extra="forbid")

    points: list[Coords]
    ids: list[int] | None = None


class UpdateResult(BaseModel):
    name: str
    count: int
    live: int


class KnnQuery(BaseModel):
    model_config = ConfigDict(extra="forbid")

    queries: list[Coords]
    k: int = Field(default=5, ge=1, le=10_000)


class Neighbor(BaseModel):
    id: int
    dist2: float


class KnnAnswer(BaseModel):
    k: int
    neighbors: list[list[Neighbor]]
