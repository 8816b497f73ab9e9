"""panobev: surround-camera panorama stitching and bird's-eye-view mapping.

The package has two halves.  The geometric half describes a calibrated
multi-camera rig on a view sphere, resolves every pixel of an
equirectangular panorama to a source camera and sub-pixel coordinate,
and stitches images accordingly.  The learned half turns panorama
features into a bird's-eye-view semantic grid with a deformable-sampling
view transform mixed by planar state-space scans, built on a small
reverse-mode autodiff core with verified gradients.
"""

__version__ = "0.1.0"
