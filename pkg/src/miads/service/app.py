"""HTTP service wrapping datasources, assembly and evaluation for
multi-client use (training loops in other processes or languages).

State is in-memory: datasources and assemblers live for the server's lifetime
or until deleted. All numeric results are produced by the same library code
the CLI uses, so values agree bitwise across both surfaces.
"""

from __future__ import annotations

import threading
import warnings

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..access import Datasource
from ..assembly import SubjectAssembler
from ..dataset import open_dataset
from ..errors import (
    ConfigurationError,
    EvaluationError,
    MiadsError,
    NotReadyError,
)
from ..evaluation import evaluate_continuous, evaluate_segmentation, format_value
from ..imageio import read_image
from .schemas import (
    ArrayPayload,
    AssemblerInfo,
    AssemblerRequest,
    ContinuousEvaluationRequest,
    DatasourceInfo,
    DatasourceRequest,
    EvaluationResponse,
    GeometryModel,
    HealthResponse,
    ImageResponse,
    PredictionRequest,
    PredictionStatus,
    RegionModel,
    ResultRow,
    SampleResponse,
    SegmentationEvaluationRequest,
)


class _Registry:
    def __init__(self):
        self._lock = threading.Lock()
        self._items: dict[str, object] = {}
        self._counter = 0

    def put(self, prefix: str, item) -> str:
        with self._lock:
            self._counter += 1
            key = f"{prefix}-{self._counter}"
            self._items[key] = item
            return key

    def get(self, key: str):
        with self._lock:
            if key not in self._items:
                raise KeyError(f"unknown id {key!r}")
            return self._items[key]

    def pop(self, key: str):
        with self._lock:
            if key not in self._items:
                raise KeyError(f"unknown id {key!r}")
            return self._items.pop(key)


def _sample_to_response(ds: Datasource, index: int) -> SampleResponse:
    spec = ds.spec(index)
    sample = ds.get_sample(index)
    arrays: dict[str, ArrayPayload] = {}
    meta: dict[str, object] = {}
    for key, value in sample.items():
        if isinstance(value, np.ndarray):
            arrays[key] = ArrayPayload.from_numpy(value)
        elif hasattr(value, "spacing"):
            meta[key] = GeometryModel.from_geometry(value).model_dump()
        elif isinstance(value, tuple):
            meta[key] = list(value)
        else:
            meta[key] = value
    return SampleResponse(
        sample_index=spec.sample_index,
        subject_id=ds.subjects[spec.subject_index],
        subject_index=spec.subject_index,
        region=RegionModel(start=list(spec.region.start), size=list(spec.region.size)),
        pad=list(spec.pad),
        plane=spec.plane,
        arrays=arrays,
        meta=meta,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="miads service", version=__version__)
    datasources = _Registry()
    assemblers = _Registry()

    @app.exception_handler(MiadsError)
    async def _miads_error(request, exc: MiadsError):
        status = 409 if isinstance(exc, NotReadyError) else 400
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.exception_handler(KeyError)
    async def _key_error(request, exc: KeyError):
        return JSONResponse(status_code=404, content={"detail": str(exc.args[0])})

    @app.exception_handler(IndexError)
    async def _index_error(request, exc: IndexError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _value_error(request, exc: ValueError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(FileNotFoundError)
    async def _missing_file(request, exc: FileNotFoundError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    # -- datasources -------------------------------------------------------

    @app.post("/datasources", response_model=DatasourceInfo)
    def create_datasource(request: DatasourceRequest):
        handle = open_dataset(request.dataset_path)
        if request.filesystem and not handle.metadata.metadata_only:
            raise ConfigurationError(
                "filesystem=true needs a metadata-only container (payloads on disk)"
            )
        ds = Datasource(
            handle,
            request.strategy.build(),
            [e.build() for e in request.extractors],
            [t.build() for t in request.transforms],
            seed=request.seed,
        )
        key = datasources.put("ds", ds)
        return _datasource_info(key, ds)

    def _datasource_info(key: str, ds: Datasource) -> DatasourceInfo:
        return DatasourceInfo(
            datasource_id=key,
            length=len(ds),
            subjects=list(ds.subjects),
            spatial_shapes=[list(s) for s in ds.spatial_shapes],
        )

    @app.get("/datasources/{datasource_id}", response_model=DatasourceInfo)
    def datasource_info(datasource_id: str):
        return _datasource_info(datasource_id, datasources.get(datasource_id))

    @app.get("/datasources/{datasource_id}/samples/{index}", response_model=SampleResponse)
    def get_sample(datasource_id: str, index: int):
        ds: Datasource = datasources.get(datasource_id)
        return _sample_to_response(ds, index)

    @app.delete("/datasources/{datasource_id}")
    def delete_datasource(datasource_id: str):
        ds: Datasource = datasources.pop(datasource_id)
        ds.handle.close()
        return {"deleted": datasource_id}

    # -- assembly ----------------------------------------------------------

    @app.post("/assemblers", response_model=AssemblerInfo)
    def create_assembler(request: AssemblerRequest):
        ds: Datasource = datasources.get(request.datasource_id)
        assembler = SubjectAssembler(ds)
        key = assemblers.put("asm", assembler)
        return AssemblerInfo(
            assembler_id=key,
            datasource_id=request.datasource_id,
            expected={s: assembler.expected(s) for s in ds.subjects},
        )

    @app.post("/assemblers/{assembler_id}/predictions", response_model=PredictionStatus)
    def add_prediction(assembler_id: str, request: PredictionRequest):
        assembler: SubjectAssembler = assemblers.get(assembler_id)
        assembler.add(request.sample_index, request.prediction.to_numpy())
        spec = assembler.datasource.spec(request.sample_index)
        subject_id = assembler.datasource.subjects[spec.subject_index]
        return PredictionStatus(
            subject_id=subject_id,
            received=assembler.received(subject_id),
            expected=assembler.expected(subject_id),
            ready=assembler.is_ready(subject_id),
        )

    @app.get("/assemblers/{assembler_id}/subjects/{subject_id}")
    def assemble(assembler_id: str, subject_id: str):
        assembler: SubjectAssembler = assemblers.get(assembler_id)
        if subject_id not in assembler.datasource.subjects:
            raise KeyError(f"unknown subject {subject_id!r}")
        return {
            "subject_id": subject_id,
            "array": ArrayPayload.from_numpy(assembler.assemble(subject_id)).model_dump(),
        }

    @app.delete("/assemblers/{assembler_id}")
    def delete_assembler(assembler_id: str):
        assemblers.pop(assembler_id)
        return {"deleted": assembler_id}

    # -- evaluation --------------------------------------------------------

    def _metric_list(metrics):
        return [m if isinstance(m, str) else m.build() for m in metrics]

    @app.post("/evaluations/segmentation", response_model=EvaluationResponse)
    def evaluate_segmentation_endpoint(request: SegmentationEvaluationRequest):
        try:
            labels = {int(k): v for k, v in request.labels.items()}
        except ValueError as exc:
            raise EvaluationError(f"label keys must be integers: {exc}") from exc
        from ..core import ImageGeometry

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            results = evaluate_segmentation(
                request.reference.to_numpy(),
                request.prediction.to_numpy(),
                labels,
                _metric_list(request.metrics),
                request.subject_id,
                geometry=ImageGeometry(spacing=tuple(request.spacing)),
            )
        return EvaluationResponse(
            results=[
                ResultRow(
                    subject_id=r.subject_id,
                    label=r.label_name,
                    metric=r.metric,
                    value=format_value(r.value),
                )
                for r in results
            ]
        )

    @app.post("/evaluations/continuous", response_model=EvaluationResponse)
    def evaluate_continuous_endpoint(request: ContinuousEvaluationRequest):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            results = evaluate_continuous(
                request.reference.to_numpy(),
                request.prediction.to_numpy(),
                _metric_list(request.metrics),
                request.subject_id,
            )
        return EvaluationResponse(
            results=[
                ResultRow(
                    subject_id=r.subject_id,
                    label=r.label_name,
                    metric=r.metric,
                    value=format_value(r.value),
                )
                for r in results
            ]
        )

    # -- images ------------------------------------------------------------

    @app.get("/images", response_model=ImageResponse)
    def load_image(path: str):
        arr, geometry = read_image(path)
        return ImageResponse(
            array=ArrayPayload.from_numpy(arr),
            geometry=GeometryModel.from_geometry(geometry),
        )

    return app


app = create_app()
