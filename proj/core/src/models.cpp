#include "i8t/models.hpp"

#include <stdexcept>

namespace i8t {

std::vector<std::pair<std::string, Layer*>> Model::leaves() {
  std::vector<std::pair<std::string, Layer*>> out;
  net->visit("", [&out](const std::string& path, Layer& l) { out.emplace_back(path, &l); });
  return out;
}

int64_t Model::param_count() {
  int64_t count = 0;
  for (auto& [path, layer] : leaves())
    for (const ParamRef& p : layer->params()) count += p.value->numel();
  return count;
}

namespace {

Model build_tiny_cnn(uint64_t seed, int num_classes) {
  InitRng rng(seed);
  Model m;
  m.name = "tiny_cnn";
  m.input_shape = Shape{3, 32, 32};
  m.num_classes = num_classes;
  m.net = std::make_unique<Sequential>();
  m.net->add("conv1", std::make_unique<Conv2d>(3, 4, 3, 1, 1, false, rng));
  m.net->add("bn1", std::make_unique<BatchNorm2d>(4));
  m.net->add("relu1", std::make_unique<ReLU>());
  m.net->add("pool1", std::make_unique<Pool2d>(PoolKind::kMax, 2, 2));
  m.net->add("conv2", std::make_unique<Conv2d>(4, 8, 3, 1, 1, false, rng));
  m.net->add("bn2", std::make_unique<BatchNorm2d>(8));
  m.net->add("relu2", std::make_unique<ReLU>());
  m.net->add("pool2", std::make_unique<Pool2d>(PoolKind::kMax, 2, 2));
  m.net->add("gap", std::make_unique<Pool2d>(PoolKind::kAvg, 8, 8));
  m.net->add("fc", std::make_unique<Dense>(8, num_classes, rng));
  return m;
}

Model build_tiny_resnet(uint64_t seed, int num_classes) {
  InitRng rng(seed);
  Model m;
  m.name = "tiny_resnet";
  m.input_shape = Shape{3, 32, 32};
  m.num_classes = num_classes;
  m.net = std::make_unique<Sequential>();
  m.net->add("stem", std::make_unique<Conv2d>(3, 8, 3, 1, 1, false, rng));
  m.net->add("stem_bn", std::make_unique<BatchNorm2d>(8));
  m.net->add("stem_relu", std::make_unique<ReLU>());
  m.net->add("block1", std::make_unique<ResidualBlock>(8, 8, 1, rng));
  m.net->add("block2", std::make_unique<ResidualBlock>(8, 16, 2, rng));
  m.net->add("gap", std::make_unique<Pool2d>(PoolKind::kAvg, 16, 16));
  m.net->add("fc", std::make_unique<Dense>(16, num_classes, rng));
  return m;
}

Model build_tiny_mobilenet(uint64_t seed, int num_classes) {
  InitRng rng(seed);
  Model m;
  m.name = "tiny_mobilenet";
  m.input_shape = Shape{3, 32, 32};
  m.num_classes = num_classes;
  m.net = std::make_unique<Sequential>();
  m.net->add("stem", std::make_unique<Conv2d>(3, 8, 3, 1, 1, false, rng));
  m.net->add("stem_bn", std::make_unique<BatchNorm2d>(8));
  m.net->add("stem_relu", std::make_unique<ReLU>());
  m.net->add("block1", std::make_unique<InvertedResidual>(8, 12, 2, 2, rng));
  m.net->add("block2", std::make_unique<InvertedResidual>(12, 12, 1, 2, rng));
  m.net->add("block3", std::make_unique<InvertedResidual>(12, 16, 2, 2, rng));
  m.net->add("head", std::make_unique<Conv2d>(16, 32, 1, 1, 0, false, rng));
  m.net->add("head_bn", std::make_unique<BatchNorm2d>(32));
  m.net->add("head_relu", std::make_unique<ReLU>());
  m.net->add("gap", std::make_unique<Pool2d>(PoolKind::kAvg, 8, 8));
  m.net->add("fc", std::make_unique<Dense>(32, num_classes, rng));
  return m;
}

Model build_convex_logistic(uint64_t seed, int64_t input_dim, int num_classes) {
  InitRng rng(seed);
  Model m;
  m.name = "convex_logistic";
  m.input_shape = Shape{1, 1, input_dim};
  m.num_classes = num_classes;
  m.net = std::make_unique<Sequential>();
  m.net->add("fc", std::make_unique<Dense>(input_dim, num_classes, rng));
  return m;
}

}  // namespace

Model build_model(const std::string& name, uint64_t seed, int64_t input_dim, int num_classes) {
  if (name == "tiny_cnn") return build_tiny_cnn(seed, num_classes);
  if (name == "tiny_resnet") return build_tiny_resnet(seed, num_classes);
  if (name == "tiny_mobilenet") return build_tiny_mobilenet(seed, num_classes);
  if (name == "convex_logistic") return build_convex_logistic(seed, input_dim, num_classes);
  throw std::invalid_argument("unknown model: " + name);
}

bool is_known_model(const std::string& name) {
  return name == "tiny_cnn" || name == "tiny_resnet" || name == "tiny_mobilenet" ||
         name == "convex_logistic";
}

bool is_convex_model(const std::string& name) { return name == "convex_logistic"; }

}  // namespace i8t
