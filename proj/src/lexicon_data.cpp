// Built-in English lexicon for the default tagger. Each list is a
// whitespace-separated run of lowercase words sharing one coarse tag.

#include "lexicon_data.hpp"

namespace chulo::detail {

namespace {

constexpr const char* kOther = R"(
a an the this that these those some any each every no another either neither
all both half such what which whose whatever whichever
i me my mine myself you your yours yourself yourselves he him his himself she
her hers herself it its itself we us our ours ourselves they them their theirs
themselves one ones someone somebody something anyone anybody anything everyone
everybody everything nobody nothing none who whom
of in on at by for with about against between into through during before after
above below to from up down out off over under again further than via per
across along among around behind beside besides beyond despite except inside
near onto outside past since toward towards upon within without throughout
until unlike amid
and or but nor so yet if because although though while whereas unless whether
as once lest
is am are was were be been being has have had having do does did doing
will would shall should can could may might must ought
not n't 's 'll 're 've 'd 'm there here where when why how whenever wherever
)";

constexpr const char* kVerb = R"(
say says said make makes made go goes went gone take takes took taken come
comes came see sees saw seen know knows knew known get gets got give gives gave
given find finds found think thinks thought tell tells told become becomes
became show shows showed shown leave leaves left feel feels felt put puts bring
brings brought begin begins began begun keep keeps kept hold holds held write
writes wrote written stand stands stood hear hears heard let lets mean means
meant set sets meet meets met run runs ran pay pays paid sit sits sat speak
speaks spoke spoken lie lies lay lead leads led read reads grow grows grew grown
lose loses lost fall falls fell fallen send sends sent build builds built
understand understands understood draw draws drew drawn break breaks broke
broken spend spends spent cut cuts rise rises rose rising drive drives drove buy
buys bought wear wears wore choose chooses chose seek seeks sought throw throws
threw catch catches caught deal deals dealt win wins won
use uses used want wants wanted look looks looked ask asks asked work works
worked seem seems seemed try tries tried call calls called need needs needed
help helps helped talk talks talked turn turns turned start starts started
move moves moved like likes liked live lives lived believe believes believed
happen happens happened include includes included continue continues continued
change changes changed provide provides provided allow allows allowed add adds
added expect expects expected remain remains remained suggest suggests suggested
report reports reported decide decides decided discuss discusses discussed
describe describes described argue argues argued claim claims claimed
announce announces announced explain explains explained reveal reveals revealed
study studies studied mention mentions mentioned focus focuses focused
raise raises raised reach reaches reached increase increases increased
reduce reduces reduced develop develops developed create creates created
consider considers considered appear appears appeared offer offers offered
follow follows followed stop stops stopped open opens opened walk walks walked
watch watches watched learn learns learned play plays played serve serves
served die dies died kill kills killed return returns returned agree agrees
agreed support supports supported produce produces produced improve improves
improved affect affects affected apply applies applied warn warns warned
visit visits visited join joins joined cover covers covered propose proposes
proposed face faces faced enter enters entered require requires required
examine examines examined present presents presented note notes noted
)";

constexpr const char* kAdverb = R"(
very also just only even still already often never always sometimes usually
really quite rather almost nearly perhaps maybe too soon now then today
tomorrow yesterday ago away back together else instead indeed however thus
therefore hence meanwhile moreover furthermore otherwise later early well
much more most less least enough far recently currently mostly largely
)";

constexpr const char* kAdjective = R"(
big small large little long short high low old new young good bad great
important different public able early late hard easy real best better
whole free full special clear certain political social national local
economic major recent strong possible likely main general human federal
private international current true false open close common simple recent
similar various final central foreign military legal medical financial
natural cultural environmental digital global rural urban modern ancient
red blue green black white yellow dark bright fast slow quick heavy light
hot cold warm cool dry wet rich poor cheap expensive happy sad angry calm
quiet loud safe dangerous famous popular rare strange serious useful deep
wide narrow thick thin fresh clean dirty empty busy ready sure wrong right
key major minor basic complex entire particular significant primary
personal official senior junior annual daily weekly monthly open fair
solar electric nuclear marine coastal arctic tropical urban industrial
agricultural scientific historical musical athletic medieval royal
wooden golden silver crystal frozen sacred hidden secret ancient vast
tiny huge giant brief rapid steady stable harsh mild gentle fierce brave
)";

constexpr const char* kNoun = R"(
time year people way day man woman child world life hand part place case week
company system program question work government number night point home water
room mother area money story fact month lot right study book eye job word
business issue side kind head house service friend father power hour game line
end member law car city community name president team minute idea kid body
information school face others level office door health person art war history
party result change morning reason research girl guy moment air teacher force
education foot boy age policy process music market sense nation plan college
interest death experience effect use class control care field development role
effort rate heart drug show leader light voice wife police mind price report
decision son view relationship town road arm difference value building action
model season society tax director position player record paper space ground
form event official matter center couple site project activity star table need
court oil situation cost industry figure street image phone data picture
practice piece land product doctor wall patient worker news test movie north
love support technology step baby computer type attention film tree source
organization hair window evidence population energy economy bank state
dog cat bird fish horse cow sheep animal forest river mountain lake sea ocean
island valley desert garden farm village castle bridge tower church temple
king queen prince princess knight soldier army battle sword shield crown
ship boat train plane engine machine robot rocket satellite planet moon sun
galaxy universe atom molecule cell gene protein virus disease vaccine
hospital medicine surgery therapy diagnosis symptom treatment clinic nurse
election vote campaign candidate senate congress parliament minister
court judge lawyer trial verdict crime prison police officer detective
stock share investor profit loss revenue budget debt loan interest inflation
football soccer basketball tennis baseball match goal score coach league
song album band concert guitar piano singer dance stage theater opera
chunk document token attention phrase keyphrase sentence paragraph text
panel turbine grid battery reactor fuel carbon climate emission pollution
storm flood drought harvest crop wheat corn rice soil seed fertilizer
novel poem poet author library museum gallery painting sculpture artist
software hardware network server database algorithm code chip processor
kitchen recipe bread cheese wine coffee tea sugar salt meal dinner lunch
festival holiday ceremony wedding ritual tradition custom heritage legend
coast harbor port canal tunnel highway railway airport station terminal
mineral metal iron steel copper gold silver diamond crystal stone rock
glacier volcano earthquake tsunami hurricane tornado weather temperature
telescope laboratory experiment theory equation formula hypothesis sample
contract agreement treaty alliance trade tariff export import currency
satire hoax propaganda article headline column editor journalist reporter
)";

constexpr const char* kProperNoun = R"(
january february march april june july august september october november
december monday tuesday wednesday thursday friday saturday sunday
america europe asia africa australia china india japan germany france
england britain canada mexico brazil russia italy spain london paris berlin
tokyo washington york
)";

constexpr const char* kNumber = R"(
zero two three four five six seven eight nine ten eleven twelve twenty
thirty forty fifty hundred thousand million billion first second third
)";

}  // namespace

const std::vector<LexiconBlock>& builtin_lexicon() {
  static const std::vector<LexiconBlock> blocks = {
      {PosTag::OTHER, kOther},   {PosTag::VB, kVerb}, {PosTag::RB, kAdverb},
      {PosTag::JJ, kAdjective},  {PosTag::NN, kNoun}, {PosTag::NNP, kProperNoun},
      {PosTag::CD, kNumber},
  };
  return blocks;
}

}  // namespace chulo::detail
