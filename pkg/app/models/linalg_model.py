from typing import Annotated, Any

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict

# Row-major dense real matrix. Houses R, R', R*, U, S, V and masks.
DenseMatrix = npt.NDArray[np.float64]

# {0, 1}-valued DenseMatrix; 1 marks an observed rating cell.
MaskMatrix = Annotated[npt.NDArray[np.float64], "mask"]


class SvdResult(BaseModel):
    """Thin singular value decomposition ``a = U @ diag(s) @ V.T``.

    U is m x r, V is n x r with r = min(m, n); singular values are sorted
    descending.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    U: DenseMatrix
    singular_values: npt.NDArray[np.float64]
    V: DenseMatrix
    sweeps: int = 0

    @property
    def rank(self) -> int:
        return int(self.singular_values.shape[0])

    def reconstruct(self) -> DenseMatrix:
        return (self.U * self.singular_values) @ self.V.T

    def model_post_init(self, __context: Any) -> None:
        for array in (self.U, self.singular_values, self.V):
            array.setflags(write=False)


class TruncatedSvd(BaseModel):
    """The rank-f factors ``U_f``, ``S_f`` (f x f diagonal) and ``V_f``."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    U_f: DenseMatrix
    S_f: DenseMatrix
    V_f: DenseMatrix

    @property
    def f(self) -> int:
        return int(self.S_f.shape[0])

    def reconstruct(self) -> DenseMatrix:
        return self.U_f @ self.S_f @ self.V_f.T
