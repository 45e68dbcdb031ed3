import os

from typing import Union, Tuple, List

import numpy as np

Triplet = Tuple[int,int,float]
Labels = np.ndarray
Vector = np.ndarray
SignalPair = Tuple[float,float]
PathLike = Union[str,os.PathLike]
TermList = List[str]
