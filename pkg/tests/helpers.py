"""Cached pipelines shared across test modules."""

from functools import lru_cache
from types import SimpleNamespace

from riesz_trace import assemble_forms, build_bases, build_core, eigendecompose_core, generate_structured_mesh


@lru_cache(maxsize=None)
def pipeline(domain: str, n: int) -> SimpleNamespace:
    mesh = generate_structured_mesh(domain, n)
    forms = assemble_forms(mesh)
    suite = build_core(forms)
    eig = eigendecompose_core(suite)
    pair = build_bases(suite, eig)
    return SimpleNamespace(mesh=mesh, forms=forms, suite=suite, eig=eig, pair=pair)
