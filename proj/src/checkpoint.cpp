#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "svae/genmodel.hpp"

namespace svae::genmodel {

// Format: text metadata header terminated by a DATA line, then all
// parameters as raw little-endian 64-bit reals, encoder layers first, each
// layer's weight matrix row-major followed by its bias.

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* act_name(diffnet::Activation a) {
  return a == diffnet::Activation::Tanh ? "tanh" : "identity";
}

diffnet::Activation parse_act(const std::string& s) {
  if (s == "tanh") return diffnet::Activation::Tanh;
  if (s == "identity") return diffnet::Activation::Identity;
  throw std::runtime_error("checkpoint: unknown activation " + s);
}

void write_mlp_header(std::ostream& out, const char* tag,
                      const diffnet::Mlp& mlp) {
  out << tag << "_layers " << mlp.layers.size() << "\n";
  for (const auto& l : mlp.layers) {
    out << tag << "_layer " << l.weights.rows << " " << l.weights.cols << " "
        << act_name(l.act) << "\n";
  }
}

void append_mlp_params(std::vector<double>& flat, const diffnet::Mlp& mlp) {
  for (const auto& l : mlp.layers) {
    flat.insert(flat.end(), l.weights.data.begin(), l.weights.data.end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ostringstream header;
  header << "SVAE-CKPT v" << kCheckpointVersion << "\n";
  header << "kind " << (ckpt.kind == ModelKind::Vae ? "vae" : "stvae") << "\n";
  header << "F " << ckpt.bins() << "\n";
  header << "L " << ckpt.latent_dim << "\n";
  header << "window_len " << ckpt.stft.window_len << "\n";
  header << "hop " << ckpt.stft.hop << "\n";
  header << "window sine\n";
  header << "alpha " << format_double(ckpt.prior.alpha) << "\n";
  header << "beta " << format_double(ckpt.prior.beta) << "\n";
  write_mlp_header(header, "encoder", ckpt.encoder);
  write_mlp_header(header, "decoder", ckpt.decoder);
  header << "DATA\n";

  std::vector<double> flat;
  append_mlp_params(flat, ckpt.encoder);
  append_mlp_params(flat, ckpt.decoder);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot create checkpoint: " + path);
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);

  Checkpoint ckpt;
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("corrupt checkpoint file: " + path);
  if (line.rfind("SVAE-CKPT v", 0) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  const int version = std::stoi(line.substr(11));
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version) + " in " + path);
  }

  auto read_mlp = [&](const std::string& tag, diffnet::Mlp& mlp,
                      std::istringstream& first) {
    std::size_t n = 0;
    first >> n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::getline(in, line))
        throw std::runtime_error("corrupt checkpoint file: " + path);
      std::istringstream ls(line);
      std::string key, act;
      std::size_t rows = 0, cols = 0;
      ls >> key >> rows >> cols >> act;
      if (key != tag + "_layer" || rows == 0 || cols == 0)
        throw std::runtime_error("corrupt checkpoint header: " + path);
      diffnet::DenseLayer layer;
      layer.weights = Matrix(rows, cols);
      layer.bias.assign(rows, 0.0);
      layer.act = parse_act(act);
      mlp.layers.push_back(std::move(layer));
    }
  };

  bool saw_data = false;
  while (std::getline(in, line)) {
    if (line == "DATA") {
      saw_data = true;
      break;
    }
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "kind") {
      std::string v;
      ls >> v;
      if (v == "vae")
        ckpt.kind = ModelKind::Vae;
      else if (v == "stvae")
        ckpt.kind = ModelKind::Stvae;
      else
        throw std::runtime_error("corrupt checkpoint header: " + path);
    } else if (key == "L") {
      ls >> ckpt.latent_dim;
    } else if (key == "window_len") {
      ls >> ckpt.stft.window_len;
    } else if (key == "hop") {
      ls >> ckpt.stft.hop;
    } else if (key == "alpha") {
      ls >> ckpt.prior.alpha;
    } else if (key == "beta") {
      ls >> ckpt.prior.beta;
    } else if (key == "encoder_layers") {
      read_mlp("encoder", ckpt.encoder, ls);
    } else if (key == "decoder_layers") {
      read_mlp("decoder", ckpt.decoder, ls);
    }
    // "F" and "window" are redundant with the fields above; ignored here
  }
  if (!saw_data)
    throw std::runtime_error("corrupt checkpoint file (no DATA): " + path);

  std::size_t total = 0;
  for (const auto& l : ckpt.encoder.layers)
    total += l.weights.data.size() + l.bias.size();
  for (const auto& l : ckpt.decoder.layers)
    total += l.weights.data.size() + l.bias.size();

  std::vector<double> flat(total);
  in.read(reinterpret_cast<char*>(flat.data()),
          static_cast<std::streamsize>(total * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != total * sizeof(double))
    throw std::runtime_error("corrupt checkpoint file (truncated): " + path);

  std::size_t pos = 0;
  auto fill_mlp = [&](diffnet::Mlp& mlp) {
    for (auto& l : mlp.layers) {
      std::memcpy(l.weights.data.data(), flat.data() + pos,
                  l.weights.data.size() * sizeof(double));
      pos += l.weights.data.size();
      std::memcpy(l.bias.data(), flat.data() + pos,
                  l.bias.size() * sizeof(double));
      pos += l.bias.size();
    }
  };
  fill_mlp(ckpt.encoder);
  fill_mlp(ckpt.decoder);

  if (ckpt.encoder.layers.empty() || ckpt.decoder.layers.empty())
    throw std::runtime_error("corrupt checkpoint (missing layers): " + path);
  if (ckpt.encoder.output_dim() !=
          2 * static_cast<std::size_t>(ckpt.latent_dim) ||
      ckpt.decoder.input_dim() != static_cast<std::size_t>(ckpt.latent_dim) ||
      ckpt.encoder.input_dim() != static_cast<std::size_t>(ckpt.bins()) ||
      ckpt.decoder.output_dim() != static_cast<std::size_t>(ckpt.bins()))
    throw std::runtime_error("inconsistent checkpoint dimensions: " + path);
  return ckpt;
}

}  // namespace svae::genmodel
