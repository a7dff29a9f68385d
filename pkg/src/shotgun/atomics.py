"""Lock-free float64 primitives for numba code running without the GIL.

x86-64 and aarch64 have no native atomic float add, so ``atomic_add``
retries a 64-bit compare-and-swap on the value's bit pattern.
"""

from llvmlite import ir
from numba import njit, types
from numba.core import cgutils
from numba.extending import intrinsic


def _element_ptr_i64(context, builder, arrty, arr, idx):
    ary = context.make_array(arrty)(context, builder, arr)
    ptr = cgutils.get_item_pointer(context, builder, arrty, ary, [idx])
    return builder.bitcast(ptr, ir.IntType(64).as_pointer())


@intrinsic
def atomic_load(typingctx, arr, idx):
    """Sequentially consistent load of ``arr[idx]`` (float64 array)."""
    sig = types.float64(arr, idx)

    def codegen(context, builder, sig, args):
        ptr = _element_ptr_i64(context, builder, sig.args[0], args[0], args[1])
        bits = builder.load_atomic(ptr, "seq_cst", 8)
        return builder.bitcast(bits, ir.DoubleType())

    return sig, codegen


@intrinsic
def compare_and_swap(typingctx, arr, idx, expected, new):
    """Replace ``arr[idx]`` by ``new`` iff its bits equal ``expected``'s.

    Returns True on success.
    """
    sig = types.boolean(arr, idx, types.float64, types.float64)

    def codegen(context, builder, sig, args):
        ptr = _element_ptr_i64(context, builder, sig.args[0], args[0], args[1])
        i64 = ir.IntType(64)
        exp = builder.bitcast(args[2], i64)
        val = builder.bitcast(args[3], i64)
        res = builder.cmpxchg(ptr, exp, val, "seq_cst", "seq_cst")
        return builder.extract_value(res, 1)

    return sig, codegen


@njit(nogil=True, cache=True)
def atomic_add(arr, idx, value):
    """``arr[idx] += value`` with no lost additions; returns the retry count."""
    retries = 0
    while True:
        old = atomic_load(arr, idx)
        if compare_and_swap(arr, idx, old, old + value):
            return retries
        retries += 1
