#pragma once

namespace fixtures {

// The looped example graph: x = t^2, u = w + x, v = x * y, z = u * v,
// with w = 2, t = 1, y = 3. Forward: x=1, u=3, v=3, z=9.
// Adjoints: z:1, u:3, v:3, w:3, y:3, x:12, t:24.
inline const char* kExample = R"(
input w = 2.0
input t = 1.0
input y = 3.0
x = pow2(t)
u = add(w, x)
v = mul(x, y)
z = mul(u, v)
objective z
)";

inline const char* kIdentity = R"(
input a = 5.0
objective a
)";

// z = 3 * x with the coefficient baked into the op, so the downward message
// into x is exactly log-linear.
inline const char* kLinear = R"(
input x = 2.0
z = mulc:3(x)
objective z
)";

}  // namespace fixtures
