#ifndef SLDML_CLASS_ID_HPP_
#define SLDML_CLASS_ID_HPP_

#include <map>
#include <set>
#include <string>
#include <string_view>

namespace sldml {

/// Natural ordering for class ids: digit runs compare numerically, so "A7" < "A13".
bool class_id_less(std::string_view a, std::string_view b);

struct ClassIdLess {
  using is_transparent = void;
  bool operator()(std::string_view a, std::string_view b) const { return class_id_less(a, b); }
};

using ClassSet = std::set<std::string, ClassIdLess>;

template <typename V>
using ClassMap = std::map<std::string, V, ClassIdLess>;

}  // namespace sldml

#endif  // SLDML_CLASS_ID_HPP_
