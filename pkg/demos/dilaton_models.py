"""Two-dimensional dilaton models: line elements, vacua and horizons."""

from kkflat import dilaton as D

for name, params in (("I1", dict(A=1.0, B=0.5)), ("I2", dict(Y=1.0, M=0.0)),
                     ("I2", dict(Y=1.0, M=0.1)), ("I2_dual", dict(Y=1.0, M=0.1))):
    model = D.preset(name, **params)
    vacua = ", ".join(f"X={v.X:+.6f} R={v.R:+.6f}" for v in D.constant_dilaton_vacua(model))
    horizons = ", ".join(f"{x:+.6f}" for x in D.horizon_roots(model))
    print(f"{name} {params}")
    print(f"  vacua:    {vacua or 'none'}")
    print(f"  horizons: {horizons or 'none'}")

# closed forms against quadrature of the potentials
model = D.preset("I1_dual", A=1.0, B=0.5)
twin = D.quadrature_twin(model)
for x in (-2.0, 0.5, 3.0):
    print(f"I1_dual K({x:+.1f}): closed form {model.K_at(x):.12f}, quadrature {twin.K_at(x):.12f}")
