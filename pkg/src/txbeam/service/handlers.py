"""Request handlers, callable in-process or behind the HTTP routes."""

from __future__ import annotations

from .. import pipeline
from ..config import resolve_config
from . import schemas as s


class Handlers:
    """Binds the pipeline to one map cache, so a long-running server loads each map once."""

    def __init__(self, cache: pipeline.MapCache | None = None):
        self.cache = pipeline.MapCache() if cache is None else cache

    @staticmethod
    def _config(raw: dict):
        # the caller has already applied its environment and flag overrides
        return resolve_config(raw, use_env=False)

    def maps(self, req: s.MapsRequest) -> s.MapsResponse:
        cfg = self._config(req.config)
        recs = pipeline.build_maps(cfg, req.mode, req.f0, req.force)
        if req.force:
            self.cache.clear()
        return s.MapsResponse(maps=[s.MapRecord(**r) for r in recs])

    def bp(self, req: s.BPRequest) -> s.BPResponse:
        cfg = self._config(req.config)
        info = pipeline.run_bp(cfg, req.mode, image=req.image, text=req.text, name=req.name,
                               delays=req.delays, cache=self.cache)
        return s.BPResponse(**info)

    def compare(self, req: s.CompareRequest) -> s.CompareResponse:
        rep = pipeline.run_compare(req.bp_path, req.reference_path, floor_db=req.floor_db,
                                   bin_width=req.bin_width, threshold=req.threshold)
        d = rep.difference
        return s.CompareResponse(
            distance=rep.distance, alpha_star=rep.alpha_star, num_points=rep.num_points,
            max_abs_db=float(d.grid.max()), mean_abs_db=float(d.grid.mean()),
            edges=d.edges.tolist(), counts=d.counts.tolist(), threshold=rep.threshold,
            passed=rep.passed, report=rep.to_text())

    def sweep(self, req: s.SweepRequest) -> s.SweepResponse:
        cfg = self._config(req.config)
        out = pipeline.run_sweep(cfg, req.mode, reference_dir=req.reference_dir, image=req.image,
                                 floor_db=req.floor_db, cache=self.cache)
        return s.SweepResponse(**out)

    def pca(self, req: s.PCARequest) -> s.PCAResponse:
        cfg = self._config(req.config)
        res = pipeline.run_pca(cfg, count=req.count, k=req.k, f0s=req.f0, num_pairs=req.num_pairs,
                               pin_center=req.pin_center, save_ensemble=req.save_ensemble, cache=self.cache)
        return s.PCAResponse(results=[s.PCARecord(**r) for r in res])
