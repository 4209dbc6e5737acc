from setuptools import setup, find_packages

setup(name='cfsim', version='1.0', packages=find_packages(exclude=["tests", "examples*"]), python_requires=">=3.9",
      install_requires=["numpy>=1.22", "scipy>=1.8", "cvxpy>=1.4", "crcmod~=1.7", "pathvalidate"])
