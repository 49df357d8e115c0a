#ifndef TSL_CLI_HPP
#define TSL_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace tsl {

// Exit codes: 0 ok, 2 usage, 3 scenario validation/parse failure, 4 runtime.
int cli_main(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace tsl

#endif
