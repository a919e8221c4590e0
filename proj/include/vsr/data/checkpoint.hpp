// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container: a single file holding a text manifest followed by
// named SVT payloads. The manifest records the training stage, config
// key-values, and for each tensor its name, true shape and frozen flag;
// payloads are flat SVT blobs in manifest order.
//
//   magic        "VSRCKPT1" (8 bytes)
//   u32 LE       manifest byte length
//   manifest     text, lines:
//                  stage <k>
//                  config <key> <value>
//                  tensor <name> <d0,d1,...> <frozen 0|1>
//   payloads     one SVT blob per tensor line

#pragma once

#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "svt.hpp"

namespace vsr {

struct Checkpoint {
    int stage = -1;
    std::map<std::string, std::string> config;
    std::vector<std::pair<std::string, Tensor>> tensors;  // true shapes preserved
    std::map<std::string, bool> frozen;

    const Tensor* find(const std::string& name) const {
        for (const auto& [n, t] : tensors)
            if (n == name) return &t;
        return nullptr;
    }

    std::map<std::string, Tensor> tensor_map() const {
        std::map<std::string, Tensor> m;
        for (const auto& [n, t] : tensors) m.emplace(n, t);
        return m;
    }
};

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ostringstream manifest;
    manifest << "stage " << ckpt.stage << "\n";
    for (const auto& [k, v] : ckpt.config) manifest << "config " << k << " " << v << "\n";
    for (const auto& [name, t] : ckpt.tensors) {
        manifest << "tensor " << name << " ";
        for (size_t i = 0; i < t.shape.size(); ++i) manifest << (i ? "," : "") << t.shape[i];
        auto it = ckpt.frozen.find(name);
        manifest << " " << (it != ckpt.frozen.end() && it->second ? 1 : 0) << "\n";
    }
    const std::string m = manifest.str();

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("save_checkpoint: cannot open '" + path + "' for writing");
    f.write("VSRCKPT1", 8);
    detail::put_u32_le(f, static_cast<uint32_t>(m.size()));
    f.write(m.data(), static_cast<std::streamsize>(m.size()));
    for (const auto& [name, t] : ckpt.tensors) {
        Tensor flat = t;
        flat.shape = {1, 1, 1, static_cast<int>(t.numel())};
        write_svt(f, flat);
    }
    if (!f) throw IoError("save_checkpoint: write to '" + path + "' failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_checkpoint: cannot open '" + path + "'");
    char magic[8];
    if (!f.read(magic, 8) || std::memcmp(magic, "VSRCKPT1", 8) != 0)
        throw IoError("load_checkpoint: bad magic in '" + path + "'");
    uint32_t mlen;
    if (!detail::get_u32_le(f, mlen)) throw IoError("load_checkpoint: header truncated in '" + path + "'");
    std::string manifest(mlen, '\0');
    if (!f.read(manifest.data(), mlen)) throw IoError("load_checkpoint: manifest truncated in '" + path + "'");

    Checkpoint ckpt;
    struct Entry {
        std::string name;
        std::vector<int> shape;
        bool frozen;
    };
    std::vector<Entry> entries;
    std::istringstream ms(manifest);
    std::string line;
    while (std::getline(ms, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "stage") {
            ls >> ckpt.stage;
        } else if (tag == "config") {
            std::string k, v;
            ls >> k >> v;
            ckpt.config[k] = v;
        } else if (tag == "tensor") {
            Entry e;
            std::string dims;
            int fr;
            ls >> e.name >> dims >> fr;
            if (!ls) throw IoError("load_checkpoint: malformed tensor line '" + line + "' in '" + path + "'");
            e.frozen = fr != 0;
            std::istringstream ds(dims);
            std::string d;
            while (std::getline(ds, d, ',')) e.shape.push_back(std::stoi(d));
            entries.push_back(std::move(e));
        } else {
            throw IoError("load_checkpoint: unknown manifest tag '" + tag + "' in '" + path + "'");
        }
    }
    for (const auto& e : entries) {
        Tensor flat = read_svt(f, "tensor '" + e.name + "' of '" + path + "'", /*trailing_check=*/false);
        require(static_cast<long long>(flat.numel()) == numel_of(e.shape),
                "load_checkpoint: payload of '" + e.name + "' has " + std::to_string(flat.numel()) +
                    " values, manifest shape " + shape_str(e.shape));
        Tensor t(e.shape, std::move(flat.data));
        ckpt.frozen[e.name] = e.frozen;
        ckpt.tensors.emplace_back(e.name, std::move(t));
    }
    char extra;
    if (f.read(&extra, 1)) throw IoError("load_checkpoint: trailing bytes in '" + path + "'");
    return ckpt;
}

}  // namespace vsr
