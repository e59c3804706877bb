// Native side of the minitarget test library: the input checks its ops
// are supposed to perform.

namespace mt {
namespace native {

Tensor abs(const Tensor& self) {
  TORCH_CHECK(!self.is_complex(), "abs: complex tensors are not supported");
  return at::abs_kernel(self);
}

Tensor sum_dim(const Tensor& self, int64_t dim) {
  TORCH_CHECK(dim >= 0, "sum: dim must be non-negative");
  return reduce(self, dim);
}

Tensor view(const Tensor& self, IntArrayRef size) {
  TORCH_CHECK(!size.empty(), "view: size must not be empty");
  return self.alias_with_sizes(size);
}

Tensor clamp(const Tensor& self, double min, double max) {
  TORCH_CHECK(min <= max, "clamp: min must not exceed max");
  return clamp_kernel(self, min, max);
}

}  // namespace native
}  // namespace mt
