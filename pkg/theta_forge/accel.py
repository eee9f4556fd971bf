"""Ahead-of-time compilation of the enumeration kernels.

``_kernels.py`` is valid Cython in pure-Python mode. Building it writes a
setuptools script from :data:`~theta_forge.template.BUILD_SCRIPT_TEMPLATE`
and runs ``build_ext --inplace``, which drops the extension module next to
the source file; Python then imports the compiled module in its place.
"""
import importlib.machinery
import logging
import os
import shutil
import subprocess
import sys
from dataclasses import dataclass
from typing import Optional

from .template import BUILD_SCRIPT_TEMPLATE

logger = logging.getLogger(__name__)

KERNEL_MODULES = ["theta_forge/_kernels.py"]
WORK_DIR_NAME = ".theta_forge"


@dataclass
class BuildOptions:
    nthread: int = 1
    quiet: bool = False
    release: bool = False
    debug: bool = False
    ccache: Optional[str] = None
    work_dir: Optional[str] = None


def find_ccache() -> Optional[str]:
    return shutil.which("ccache")


def package_root() -> str:
    """Directory holding the ``theta_forge`` package."""
    return os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def kernels_compiled() -> bool:
    from . import _kernels

    return any(_kernels.__file__.endswith(s) for s in importlib.machinery.EXTENSION_SUFFIXES)


class KernelBuilder:
    def __init__(self, options: Optional[BuildOptions] = None):
        self.options = options or BuildOptions()
        if self.options.nthread < 1:
            raise ValueError("nthread must be at least 1")
        self._work_dir = os.path.abspath(self.options.work_dir or os.path.join(os.getcwd(), WORK_DIR_NAME))

    @property
    def work_dir(self) -> str:
        return self._work_dir

    def generate_build_script(self) -> str:
        content = BUILD_SCRIPT_TEMPLATE % (
            KERNEL_MODULES,
            package_root(),
            self.options.debug,
            self.options.nthread,
            os.path.join(self._work_dir, "build_c"),
            self.options.quiet,
        )
        os.makedirs(self._work_dir, exist_ok=True)
        script_path = os.path.join(self._work_dir, "build.py")
        with open(script_path, "w") as f:
            f.write(content)
        return script_path

    def _environment(self) -> dict:
        env = os.environ.copy()
        ccache_path = self.options.ccache or find_ccache()
        if ccache_path:
            env["CC"] = f"{ccache_path} {env.get('CC', 'gcc')}"
            env["CXX"] = f"{ccache_path} {env.get('CXX', 'g++')}"
            logger.info("Using ccache: %s", ccache_path)
        return env

    def build(self) -> str:
        """Compile the kernels in place; returns the package directory."""
        script_path = self.generate_build_script()
        cmd = [sys.executable, script_path, "build_ext", "--inplace",
               f"--build-temp={os.path.join(self._work_dir, 'build_tmp')}",
               f"--parallel={self.options.nthread}"]
        logger.info("> %s", " ".join(cmd))
        out = subprocess.DEVNULL if self.options.quiet else None
        code = subprocess.call(cmd, cwd=package_root(), env=self._environment(), stdout=out,
                               stderr=subprocess.STDOUT if self.options.quiet else None)
        if code:
            raise RuntimeError("Cython build of the kernels failed")
        if self.options.release:
            shutil.rmtree(self._work_dir, ignore_errors=True)
        return os.path.join(package_root(), "theta_forge")


def build_kernels(options: Optional[BuildOptions] = None) -> str:
    return KernelBuilder(options).build()
