#include "nsbm/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "nsbm/error.hpp"

namespace nsbm {
namespace {

constexpr const char* kMagic = "NSBM1";

void write_f64(std::ostream& out, std::span<const double> xs) {
  std::vector<unsigned char> buf(xs.size() * 8);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(xs[i]);
    for (int b = 0; b < 8; ++b) buf[i * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void read_f64(std::istream& in, std::span<double> xs, const std::string& path) {
  std::vector<unsigned char> buf(xs.size() * 8);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size()) throw ParseError(path + ": truncated checkpoint", 0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(buf[i * 8 + b]) << (8 * b);
    xs[i] = std::bit_cast<double>(bits);
  }
}

nlohmann::json read_header(std::istream& in, const std::string& path) {
  std::string magic, manifest;
  if (!std::getline(in, magic) || magic != kMagic) throw ParseError(path + ": not an NSBM1 checkpoint", 1);
  if (!std::getline(in, manifest)) throw ParseError(path + ": missing manifest", 2);
  try {
    return nlohmann::json::parse(manifest);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": bad manifest: " + e.what(), 2);
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const ParameterStore& params, const Adam* optimizer,
                     const nlohmann::json& meta) {
  nlohmann::json manifest;
  manifest["params"] = nlohmann::json::array();
  for (const auto& p : params) {
    manifest["params"].push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  }
  const bool with_moments = optimizer != nullptr && !optimizer->moments().empty();
  if (optimizer != nullptr) {
    manifest["adam"] = {{"steps", optimizer->step_count()},
                        {"lr", optimizer->config().lr},
                        {"beta1", optimizer->config().beta1},
                        {"beta2", optimizer->config().beta2},
                        {"eps", optimizer->config().eps},
                        {"moments", with_moments}};
  } else {
    manifest["adam"] = nullptr;
  }
  manifest["meta"] = meta;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path);
  out << kMagic << '\n' << manifest.dump() << '\n';
  for (const auto& p : params) write_f64(out, p->value.values());
  if (with_moments) {
    if (optimizer->moments().size() != params.size()) throw Error("checkpoint: optimizer/store size mismatch");
    for (const auto& m : optimizer->moments()) {
      write_f64(out, m.m.values());
      write_f64(out, m.v.values());
    }
  }
  if (!out) throw Error("failed writing checkpoint " + path);
}

nlohmann::json read_checkpoint_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  return read_header(in, path);
}

nlohmann::json load_checkpoint(const std::string& path, ParameterStore& params, Adam* optimizer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  const nlohmann::json manifest = read_header(in, path);

  std::string diff;
  const auto& entries = manifest.at("params");
  std::size_t i = 0;
  for (const auto& p : params) {
    const std::string expect = std::to_string(p->value.rows()) + "x" + std::to_string(p->value.cols());
    if (i >= entries.size()) {
      diff += "\n  " + p->name + ": missing from checkpoint (expected " + expect + ")";
    } else {
      const auto& e = entries[i];
      const std::string stored =
          std::to_string(e.at("rows").get<std::size_t>()) + "x" + std::to_string(e.at("cols").get<std::size_t>());
      if (e.at("name").get<std::string>() != p->name || stored != expect) {
        diff += "\n  " + p->name + ": expected " + expect + ", checkpoint has " + e.at("name").get<std::string>() +
                " " + stored;
      }
    }
    ++i;
  }
  for (; i < entries.size(); ++i) diff += "\n  " + entries[i].at("name").get<std::string>() + ": not in model";
  if (!diff.empty()) throw ShapeError("checkpoint " + path + " does not match the model:" + diff);

  for (auto& p : params) read_f64(in, p->value.values(), path);
  const auto& adam = manifest.at("adam");
  if (optimizer != nullptr && !adam.is_null()) {
    optimizer->set_lr(adam.at("lr").get<double>());
    std::vector<Adam::Moments> moments;
    if (adam.at("moments").get<bool>()) {
      for (const auto& p : params) {
        Adam::Moments m{Tensor(p->value.rows(), p->value.cols()), Tensor(p->value.rows(), p->value.cols())};
        read_f64(in, m.m.values(), path);
        read_f64(in, m.v.values(), path);
        moments.push_back(std::move(m));
      }
    }
    optimizer->restore(adam.at("steps").get<std::size_t>(), std::move(moments));
  }
  return manifest.at("meta");
}

}  // namespace nsbm
