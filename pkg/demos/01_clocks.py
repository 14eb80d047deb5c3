# %% [markdown]
# Two clocks. The global machine counts every micro-op; the local machine
# only sees its own transitions tick by.

# %%
from relmachine import corpus
from relmachine.metrics import lorentz_time
from relmachine.relative_model import AtomicInterpreter, RelativeModel

# %%
# one global step per local step, except the adversary slips 8 scrap writes
# in front of the second one
m = RelativeModel(corpus.unary_increment(), "11", interpreter=AtomicInterpreter(), padding=[0, 8])
m.run_local(10)
print("K   =", m.K)
print("gamma_t(1) =", lorentz_time(m.trace, 1))
print("local tape:", m.local_symbols().rstrip("_"))

# %%
# what the local machine saw at each tick is identical with or without padding
plain = RelativeModel(corpus.unary_increment(), "11", interpreter=AtomicInterpreter())
plain.run_local(10)
same = [a.tape == b.tape and a.state == b.state for a, b in zip(m.trace.local_frames, plain.trace.local_frames)]
print("local frames identical:", all(same))
print("plain K =", plain.K)
