"""Shared fixtures: the six-camera demo rig and its rendered views.

The heavyweight pieces (remap table at full panorama size, analytic
camera renders) are built once per session and reused by the stitcher
and acceptance tests.
"""

from __future__ import annotations

import numpy as np
import pytest

from panobev.stitcher import build_remap_table
from panobev.synthetic import demo_rig, render_camera_views


@pytest.fixture(scope="session")
def rig():
    return demo_rig()


@pytest.fixture(scope="session")
def rig_views(rig):
    return render_camera_views(rig)


@pytest.fixture(scope="session")
def full_remap(rig):
    return build_remap_table(rig, height=600, width=9600, jobs=4)


@pytest.fixture(scope="session")
def small_rig():
    # same angular layout at 1/5 resolution; coverage is scale-invariant
    return demo_rig(width=320, height=280)


@pytest.fixture(scope="session")
def small_rig_views(small_rig):
    return render_camera_views(small_rig)
