#include "vwb/form.hpp"

#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

namespace vwb {

namespace {

constexpr char kMagic[8] = {'V', 'W', 'B', 'F', 'O', 'R', 'M', '1'};

template <class T>
void write_impl(std::ostream& os, const Form<T>& f, std::int32_t tag) {
  os.write(kMagic, 8);
  std::int32_t hdr[4] = {f.degree(), f.box().d, f.box().L, tag};
  os.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
  os.write(reinterpret_cast<const char*>(f.data().data()), static_cast<std::streamsize>(f.data().size() * sizeof(T)));
  if (!os) throw Error("write_form: stream failure");
}

template <class T>
Form<T> read_impl(std::istream& is, std::int32_t tag) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) throw Corruption("read_form: bad magic");
  std::int32_t hdr[4];
  is.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
  if (!is) throw Corruption("read_form: truncated header");
  if (hdr[3] != tag) throw Corruption("read_form: scalar type mismatch");
  Form<T> f(LatticeBox(hdr[1], hdr[2]), hdr[0]);
  is.read(reinterpret_cast<char*>(f.data().data()), static_cast<std::streamsize>(f.data().size() * sizeof(T)));
  if (!is) throw Corruption("read_form: truncated payload");
  return f;
}

}  // namespace

void write_form(std::ostream& os, const RealForm& f) { write_impl(os, f, 0); }
void write_form(std::ostream& os, const IntForm& f) { write_impl(os, f, 1); }
RealForm read_real_form(std::istream& is) { return read_impl<double>(is, 0); }
IntForm read_int_form(std::istream& is) { return read_impl<std::int64_t>(is, 1); }

std::string dump_form(const RealForm& f) {
  std::ostringstream os;
  os.precision(17);
  os << "# degree " << f.degree() << " d " << f.box().d << " L " << f.box().L << "\n";
  const auto& tuples = direction_tuples(f.box().d, f.degree());
  for (std::int64_t s = 0; s < f.box().num_sites(); ++s) {
    Site x = f.box().site_at(s);
    for (int c = 0; c < f.ncomp(); ++c) {
      double v = f.at(s, c);
      if (v == 0.0) continue;
      for (int xi : x) os << xi << ' ';
      os << '[';
      for (std::size_t j = 0; j < tuples[c].size(); ++j) os << (j ? "," : "") << tuples[c][j] + 1;
      os << "] " << v << "\n";
    }
  }
  return os.str();
}

}  // namespace vwb
