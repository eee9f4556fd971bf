BUILD_SCRIPT_TEMPLATE = r'''import os
import platform
import sysconfig

from Cython.Build import cythonize
from Cython.Distutils import build_ext
from setuptools import Extension, setup

rel_filenames = %r
source_root = %r
include_debug = %r

old_cwd = os.getcwd()
os.chdir(source_root)

extra_compile_args = None
extra_link_args = None
if not include_debug:
    cc = (sysconfig.get_config_var("CC") or "").lower()
    if platform.system() == "Windows" and not ("gcc" in cc or "clang" in cc):
        extra_link_args = ["/DEBUG:NONE"]
    else:
        extra_compile_args = ["-O3", "-g0"]
        extra_link_args = ["-Wl,-S"]

extensions = []
for rel_filename in rel_filenames:
    mod_name = rel_filename[:-3].replace(os.path.sep, ".").replace("/", ".")
    extension = Extension(mod_name, [rel_filename], extra_compile_args=extra_compile_args,
                          extra_link_args=extra_link_args)
    extension.cython_c_in_temp = True
    extensions.append(extension)

compiler_directives = {
    "language_level": "3",
    "annotation_typing": False,
    "boundscheck": False,
    "wraparound": False,
    "cdivision": True,
}

setup(
    cmdclass={"build_ext": build_ext},
    packages=[],
    zip_safe=False,
    ext_modules=cythonize(
        extensions,
        nthreads=%d,
        build_dir=%r,
        quiet=%r,
        compiler_directives=compiler_directives,
    ),
)

os.chdir(old_cwd)
'''
