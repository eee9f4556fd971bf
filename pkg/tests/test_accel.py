import os

import pytest

from theta_forge import accel


def test_build_script_lists_the_kernels(tmp_path):
    builder = accel.KernelBuilder(accel.BuildOptions(nthread=2, quiet=True, work_dir=str(tmp_path)))
    path = builder.generate_build_script()
    assert path == os.path.join(str(tmp_path), "build.py")
    text = open(path).read()
    assert "rel_filenames = ['theta_forge/_kernels.py']" in text
    assert f"source_root = {accel.package_root()!r}" in text
    assert "include_debug = False" in text
    assert "nthreads=2" in text
    assert '"boundscheck": False' in text
    compile(text, path, "exec")


def test_debug_build_keeps_symbols(tmp_path):
    builder = accel.KernelBuilder(accel.BuildOptions(debug=True, work_dir=str(tmp_path)))
    text = open(builder.generate_build_script()).read()
    assert "include_debug = True" in text


def test_invalid_thread_count():
    with pytest.raises(ValueError):
        accel.KernelBuilder(accel.BuildOptions(nthread=0))


def test_ccache_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("CC", "clang")
    builder = accel.KernelBuilder(accel.BuildOptions(ccache="/usr/bin/ccache", work_dir=str(tmp_path)))
    env = builder._environment()
    assert env["CC"] == "/usr/bin/ccache clang"


def test_pure_python_kernels_are_importable():
    from theta_forge import _kernels

    assert accel.kernels_compiled() == (not _kernels.__file__.endswith(".py"))
