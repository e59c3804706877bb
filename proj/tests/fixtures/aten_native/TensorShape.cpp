#include <ATen/ATen.h>

namespace at { namespace native {

Tensor reshape(const Tensor& self, IntArrayRef proposed_shape) {
  TORCH_CHECK(!self.is_sparse(), "reshape is not implemented for sparse tensors");
  TORCH_CHECK(proposed_shape.size() > 0 || self.numel() == 1, "reshape: shape '[]' is invalid for input of size ", self.numel());
  return self.view(proposed_shape);
}

Tensor narrow(const Tensor& self, int64_t dim, int64_t start, int64_t length) {
  TORCH_CHECK(self.dim() > 0, "narrow() cannot be applied to a 0-dim tensor.");
  TORCH_CHECK(length >= 0, "narrow(): length must be non-negative.");
  auto cur_size = self.size(dim);
  TORCH_CHECK(start <= cur_size - length,
           "start (", start, ") + length (", length, ") exceeds dimension size (", cur_size, ").");
  return self.slice(dim, start, start + length, 1);
}

Tensor select(const Tensor& self, int64_t dim, int64_t index) {
  int64_t ndim = self.dim();
  if (ndim == 0) {
    TORCH_CHECK_INDEX(false, "select() cannot be applied to a 0-dim tensor.");
  }
  TORCH_CHECK(index >= -self.size(dim) && index < self.size(dim), "select(): index ", index, " out of range");
  return self;
}

Tensor cat(const ITensorListRef& tensors, int64_t dim) {
  TORCH_CHECK(!tensors.empty(), "torch.cat(): expected a non-empty list of Tensors");
  for (const Tensor& t : tensors) {
    TORCH_CHECK(t.dim() > 0, "zero-dimensional tensor cannot be concatenated");
  }
  return at::empty({0});
}

Tensor diag_embed(const Tensor& self, int64_t offset, int64_t dim1, int64_t dim2) {
  TORCH_CHECK(dim1 != dim2, "diagonal dimensions cannot be identical ", dim1, ", ", dim2);
  return self;
}

Tensor repeat(const Tensor& self, IntArrayRef repeats) {
  TORCH_CHECK(repeats.size() >= (size_t)self.dim(),
           "Number of dimensions of repeat dims can not be smaller than number of dimensions of tensor");
  return self;
}

}}  // namespace at::native
