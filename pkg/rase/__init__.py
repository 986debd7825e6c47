"""rase-sim - 线性化量子 Maxwell-Bloch 模型下的光子回波与 RASE 关联模拟"""

__version__ = "0.1.0"
