#include "mriq/checkpoint.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "json.hpp"

namespace mriq::ckpt {

namespace {

constexpr char kMagic[4] = {'M', 'Q', 'C', '1'};

// Serialization is explicit about byte order so checkpoints move between
// machines; on the little-endian targets we build for these are memcpys.
void put_u32(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

uint32_t get_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

void put_f32(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

float get_f32(const unsigned char* p) {
  uint32_t bits = get_u32(p);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

std::string header_json(nn::Network<float>& net) {
  // Assembled by hand to pin the key order.
  std::ostringstream os;
  os << "{\"arch\":\"" << net.arch() << "\",\"channels\":[";
  for (size_t i = 0; i < net.channels().size(); ++i) {
    if (i) os << ",";
    os << net.channels()[i];
  }
  os << "],\"input_size\":" << net.input_size()
     << ",\"num_classes\":" << net.num_classes() << ",\"seed\":" << net.seed()
     << ",\"steps\":" << net.steps << "}";
  return os.str();
}

}  // namespace

void save_checkpoint(nn::Network<float>& net, const std::string& path) {
  std::string blob;
  blob.append(kMagic, 4);
  std::string header = header_json(net);
  put_u32(blob, static_cast<uint32_t>(header.size()));
  blob += header;
  for (nn::Param<float>* p : net.params())
    for (float v : p->value) put_f32(blob, v);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw Error("write failed for " + path);
}

nn::Network<float> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::string blob((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());

  if (blob.size() < 8 || std::memcmp(blob.data(), kMagic, 4) != 0)
    throw BadMagicError(path + ": not a model checkpoint");
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  uint32_t header_len = get_u32(bytes + 4);
  if (blob.size() < 8 + static_cast<size_t>(header_len))
    throw TruncatedError(path + ": header extends past end of file");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(8, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw HeaderError(path + ": header is not valid JSON (" +
                      std::string(e.what()) + ")");
  }
  for (const char* key :
       {"arch", "channels", "input_size", "num_classes", "seed", "steps"})
    if (!header.contains(key))
      throw HeaderError(path + ": header missing key '" + key + "'");

  std::string arch = header["arch"].get<std::string>();
  std::vector<int> channels = header["channels"].get<std::vector<int>>();
  int input_size = header["input_size"].get<int>();
  int num_classes = header["num_classes"].get<int>();
  uint64_t seed = header["seed"].get<uint64_t>();
  long steps = header["steps"].get<long>();

  nn::Network<float> net;
  try {
    if (arch == "convnet4") {
      if (channels.size() != 4)
        throw HeaderError(path + ": convnet4 needs 4 channel entries, got " +
                          std::to_string(channels.size()));
      net = nn::build_convnet4<float>(
          num_classes, input_size,
          {channels[0], channels[1], channels[2], channels[3]}, seed);
    } else if (arch == "resnet10") {
      if (channels.size() != 1)
        throw HeaderError(path + ": resnet10 needs 1 channel entry, got " +
                          std::to_string(channels.size()));
      net = nn::build_resnet10lite<float>(num_classes, input_size, channels[0],
                                          seed);
    } else {
      throw HeaderError(path + ": unknown architecture '" + arch + "'");
    }
  } catch (const HeaderError&) {
    throw;
  } catch (const Error& e) {
    throw HeaderError(path + ": header describes an invalid model (" +
                      std::string(e.what()) + ")");
  }
  net.steps = steps;

  size_t need = 8 + header_len + 4 * net.param_element_count();
  if (blob.size() < need)
    throw TruncatedError(path + ": expected " + std::to_string(need) +
                         " bytes, file has " + std::to_string(blob.size()));
  if (blob.size() > need)
    throw Error(path + ": " + std::to_string(blob.size() - need) +
                " trailing bytes after parameter payload");

  size_t off = 8 + header_len;
  for (nn::Param<float>* p : net.params())
    for (float& v : p->value) {
      v = get_f32(bytes + off);
      off += 4;
    }
  return net;
}

}  // namespace mriq::ckpt
